"""
Cell- and face-centred fields living on a Grid.
"""

from dataclasses import dataclass, field
from typing import Any, Literal

import numpy as np

from app.constants import BOUND_SLACK
from app.exceptions import FieldBoundsError, GridError
from app.models.grid import Grid

FieldKind = Literal["density", "potential", "generic"]


def frozen_array(v: Any) -> np.ndarray:
    """Read-only float copy of `v`."""
    arr = np.array(v, dtype=float, copy=True)
    arr.setflags(write=False)
    return arr


def bound_excess(values: np.ndarray) -> float:
    """Largest distance of any value outside [0, 1] (0 when inside)."""
    if values.size == 0:
        return 0.0
    return float(max(0.0, -values.min(), values.max() - 1.0))


@dataclass(frozen=True, eq=False)
class CellField:
    """
    One real value per grid cell.

    Densities (u) and potentials (S) are checked against [0, 1] up to a
    1e-12 slack; generic fields (residuals, test data) only need to be finite.
    The backing array is a read-only copy so fields behave as values.
    """

    grid: Grid
    values: np.ndarray
    kind: FieldKind = "generic"

    def __post_init__(self) -> None:
        values = frozen_array(self.values)
        object.__setattr__(self, "values", values)
        if values.shape != self.grid.shape:
            raise GridError(
                f"Field shape {values.shape} does not match grid {self.grid.shape}"
            )
        if not np.all(np.isfinite(values)):
            raise FieldBoundsError(f"{self.kind} field contains non-finite values")
        if self.kind != "generic":
            excess = bound_excess(values)
            if excess > BOUND_SLACK:
                raise FieldBoundsError(f"{self.kind} field leaves [0, 1] by {excess:.3e}")

    def with_values(self, values: Any, kind: FieldKind | None = None) -> "CellField":
        """New field on the same grid."""
        return CellField(self.grid, values, kind or self.kind)

    @property
    def bound_violation(self) -> float:
        return bound_excess(self.values)


@dataclass(frozen=True, eq=False)
class FaceField:
    """
    One real value per face, stored per axis (`components[axis]`).

    On Neumann grids the wall faces are kept explicitly and must be
    identically zero (characteristic boundary).
    """

    grid: Grid
    components: tuple[np.ndarray, ...] = field(default_factory=tuple)

    def __post_init__(self) -> None:
        comps = tuple(frozen_array(c) for c in self.components)
        object.__setattr__(self, "components", comps)
        if len(comps) != self.grid.dim:
            raise GridError(f"Expected {self.grid.dim} face components, got {len(comps)}")
        for axis, comp in enumerate(comps):
            expected = self.grid.face_shape(axis)
            if comp.shape != expected:
                raise GridError(
                    f"Face component {axis} has shape {comp.shape}, expected {expected}"
                )
            if not np.all(np.isfinite(comp)):
                raise FieldBoundsError(f"Face component {axis} is not finite")
            if not self.grid.is_periodic:
                walls = np.take(comp, [0, -1], axis=axis)
                if np.any(walls != 0.0):
                    raise FieldBoundsError(
                        f"Wall faces on axis {axis} must carry zero normal values"
                    )

    def max_abs(self, axis: int | None = None) -> float:
        """Largest magnitude over all faces (or one axis)."""
        comps = self.components if axis is None else (self.components[axis],)
        return max((float(np.abs(c).max()) for c in comps if c.size), default=0.0)


def require_same_grid(*fields: CellField | FaceField) -> Grid:
    """Return the common grid or raise GridError."""
    grid = fields[0].grid
    for other in fields[1:]:
        if other.grid != grid:
            raise GridError("Fields live on different grids")
    return grid
