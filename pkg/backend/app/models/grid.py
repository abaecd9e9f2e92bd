"""
Structured Cartesian grids (1D intervals, 2D boxes or tori).
"""

import math
from typing import Literal, NamedTuple

import numpy as np
from pydantic import BaseModel, ConfigDict, Field, ValidationError, field_validator

from app.constants import MAX_DIMENSION, MIN_CELLS_PER_AXIS
from app.exceptions import GridError

BoundaryKind = Literal["neumann", "periodic"]


class BoundaryFace(NamedTuple):
    """A wall face of a Neumann grid with its outward unit normal."""

    axis: int
    side: int  # -1 for the low wall, +1 for the high wall
    cell: tuple[int, ...]
    normal: tuple[float, ...]


class GridSpec(BaseModel):
    """
    Axis lengths, cell counts and boundary kind of a grid.

    Attributes:
        lengths: Domain length per axis (positive)
        cells: Number of cells per axis (at least 4)
        boundary: 'neumann' (characteristic wall) or 'periodic' (torus)
    """

    model_config = ConfigDict(extra="forbid", frozen=True)

    lengths: tuple[float, ...] = Field(..., description="Axis lengths")
    cells: tuple[int, ...] = Field(..., description="Cells per axis")
    boundary: BoundaryKind = Field("neumann", description="Boundary kind")

    @field_validator("lengths")
    @classmethod
    def validate_lengths(cls, v: tuple[float, ...]) -> tuple[float, ...]:
        """Validate axis lengths."""
        if not 1 <= len(v) <= MAX_DIMENSION:
            raise ValueError(f"Grid dimension must be 1 or {MAX_DIMENSION}, got {len(v)}")
        if any(not math.isfinite(length) or length <= 0 for length in v):
            raise ValueError("Axis lengths must be positive")
        return v

    @field_validator("cells")
    @classmethod
    def validate_cells(cls, v: tuple[int, ...]) -> tuple[int, ...]:
        """Validate cell counts."""
        if not 1 <= len(v) <= MAX_DIMENSION:
            raise ValueError(f"Grid dimension must be 1 or {MAX_DIMENSION}, got {len(v)}")
        if any(n < MIN_CELLS_PER_AXIS for n in v):
            raise ValueError(f"Each axis needs at least {MIN_CELLS_PER_AXIS} cells")
        return v


class Grid(BaseModel):
    """Uniform cell-centred grid; faces are staggered half a cell."""

    model_config = ConfigDict(frozen=True)

    lengths: tuple[float, ...]
    cells: tuple[int, ...]
    boundary: BoundaryKind

    @property
    def dim(self) -> int:
        return len(self.cells)

    @property
    def shape(self) -> tuple[int, ...]:
        return self.cells

    @property
    def n_cells(self) -> int:
        return math.prod(self.cells)

    @property
    def spacing(self) -> tuple[float, ...]:
        return tuple(
            length / n for length, n in zip(self.lengths, self.cells, strict=True)
        )

    @property
    def min_spacing(self) -> float:
        return min(self.spacing)

    @property
    def cell_volume(self) -> float:
        return math.prod(self.spacing)

    @property
    def volume(self) -> float:
        return math.prod(self.lengths)

    @property
    def is_periodic(self) -> bool:
        return self.boundary == "periodic"

    @property
    def spec(self) -> GridSpec:
        return GridSpec(lengths=self.lengths, cells=self.cells, boundary=self.boundary)

    def cell_centers(self, axis: int = 0) -> np.ndarray:
        """Cell-centre coordinates along one axis."""
        h = self.spacing[axis]
        return (np.arange(self.cells[axis]) + 0.5) * h

    def mesh(self) -> tuple[np.ndarray, ...]:
        """Cell-centre coordinates broadcast to the grid shape."""
        axes = [self.cell_centers(a) for a in range(self.dim)]
        return tuple(np.meshgrid(*axes, indexing="ij"))

    def face_shape(self, axis: int) -> tuple[int, ...]:
        """
        Shape of the face array normal to `axis`.

        Neumann grids store both walls (n + 1 faces, walls held at zero);
        periodic grids store n faces, face i sitting between cell i and i + 1
        with the last one wrapping around.
        """
        shape = list(self.cells)
        if not self.is_periodic:
            shape[axis] += 1
        return tuple(shape)

    def _cross_section(self, axis: int) -> int:
        return math.prod(n for a, n in enumerate(self.cells) if a != axis)

    @property
    def interior_face_count(self) -> int:
        offset = 0 if self.is_periodic else 1
        return sum(
            (self.cells[a] - offset) * self._cross_section(a) for a in range(self.dim)
        )

    @property
    def boundary_face_count(self) -> int:
        if self.is_periodic:
            return 0
        return sum(2 * self._cross_section(a) for a in range(self.dim))

    @property
    def face_count(self) -> int:
        return self.interior_face_count + self.boundary_face_count

    def outward_normals(self) -> list[BoundaryFace]:
        """Wall faces with their outward normals (empty on a torus)."""
        if self.is_periodic:
            return []
        faces: list[BoundaryFace] = []
        for axis in range(self.dim):
            others = [n for a, n in enumerate(self.cells) if a != axis]
            for side in (-1, 1):
                normal = tuple(float(side) if a == axis else 0.0 for a in range(self.dim))
                wall_index = 0 if side < 0 else self.cells[axis] - 1
                for rest in np.ndindex(*others):
                    cell = list(rest)
                    cell.insert(axis, wall_index)
                    faces.append(BoundaryFace(axis, side, tuple(cell), normal))
        return faces

    def wrap_neighbors(self, axis: int) -> np.ndarray:
        """Index of the right-hand neighbour along `axis` on a torus."""
        if not self.is_periodic:
            raise GridError("Neumann grids have walls, not wraparound neighbours")
        n = self.cells[axis]
        return (np.arange(n) + 1) % n


def build_grid(
    lengths: tuple[float, ...] | list[float],
    cells: tuple[int, ...] | list[int],
    boundary: BoundaryKind = "neumann",
) -> Grid:
    """
    Build a validated grid.

    Raises:
        GridError: If sizes are not positive, an axis has fewer than 4 cells,
            the dimension exceeds 2 or lengths and cells disagree in dimension
    """
    try:
        spec = GridSpec(lengths=tuple(lengths), cells=tuple(cells), boundary=boundary)
    except ValidationError as e:
        raise GridError(str(e)) from e
    return grid_from_spec(spec)


def grid_from_spec(spec: GridSpec) -> Grid:
    """Build a grid from an already validated spec."""
    if len(spec.lengths) != len(spec.cells):
        raise GridError(
            f"lengths ({len(spec.lengths)}) and cells ({len(spec.cells)}) "
            "must have the same dimension"
        )
    return Grid(lengths=spec.lengths, cells=spec.cells, boundary=spec.boundary)
