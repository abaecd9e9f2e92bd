"""
Kinetic-variable types: the xi grid, kinetic fields f(cell, xi) and defect densities.
"""

from dataclasses import dataclass

import numpy as np
from pydantic import BaseModel, ConfigDict, Field

from app.constants import BOUND_SLACK
from app.exceptions import FieldBoundsError, GridError
from app.models.fields import bound_excess, frozen_array
from app.models.grid import Grid


class XiGrid(BaseModel):
    """
    Uniform bins partitioning xi in [0, 1].

    Values of f outside [0, 1] are not stored: f = 1 below and f = 0 above.
    Runs require at least 16 bins (enforced by the simulation config); the
    type itself accepts coarser grids for hand-checkable examples.
    """

    model_config = ConfigDict(frozen=True)

    bins: int = Field(..., ge=2, description="Number of xi bins")

    @property
    def width(self) -> float:
        return 1.0 / self.bins

    @property
    def centers(self) -> np.ndarray:
        return (np.arange(self.bins) + 0.5) * self.width

    @property
    def edges(self) -> np.ndarray:
        return np.arange(self.bins + 1) * self.width


@dataclass(frozen=True, eq=False)
class KineticField:
    """
    Values f[slab, cell..., bin] in [0, 1].

    The leading slab axis indexes time slabs: a lifted snapshot has one slab,
    a space-time box average has one slab per time box.
    """

    grid: Grid
    xi: XiGrid
    values: np.ndarray

    def __post_init__(self) -> None:
        values = frozen_array(self.values)
        object.__setattr__(self, "values", values)
        expected = self.grid.shape + (self.xi.bins,)
        if values.ndim != len(expected) + 1 or values.shape[1:] != expected:
            raise GridError(
                f"Kinetic values have shape {values.shape}, expected (slabs,) + {expected}"
            )
        excess = bound_excess(values)
        if excess > BOUND_SLACK:
            raise FieldBoundsError(f"Kinetic field leaves [0, 1] by {excess:.3e}")

    @property
    def slabs(self) -> int:
        return int(self.values.shape[0])

    def is_monotone(self, tol: float = BOUND_SLACK) -> bool:
        """True when f is nonincreasing in xi for every slab and cell."""
        return bool(np.all(np.diff(self.values, axis=-1) <= tol))


@dataclass(frozen=True, eq=False)
class DefectDensity:
    """
    Nonnegative defect density m[cell..., bin] per unit xi.

    Total mass is sum(m) * dxi * cell volume; nothing is stored outside
    xi in [0, 1], where the measure vanishes.
    """

    grid: Grid
    xi: XiGrid
    values: np.ndarray

    def __post_init__(self) -> None:
        values = frozen_array(self.values)
        object.__setattr__(self, "values", values)
        expected = self.grid.shape + (self.xi.bins,)
        if values.shape != expected:
            raise GridError(f"Defect shape {values.shape} does not match {expected}")
        if values.size and values.min() < 0.0:
            raise FieldBoundsError(f"Defect density is negative ({values.min():.3e})")

    @property
    def total_mass(self) -> float:
        return float(self.values.sum()) * self.xi.width * self.grid.cell_volume

    def __add__(self, other: "DefectDensity") -> "DefectDensity":
        if other.grid != self.grid or other.xi != self.xi:
            raise GridError("Defect densities live on different grids")
        return DefectDensity(self.grid, self.xi, self.values + other.values)
