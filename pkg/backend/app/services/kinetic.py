"""
Kinetic formulation tools: lifting u to f = 1{xi < u}, collapse, the rho
functional, the f (1 - f) bound check, rigidity defect, box averaging and
the semi-Lagrangian transport-collapse step.
"""

from collections.abc import Sequence

import numpy as np
from scipy.ndimage import map_coordinates

from app.constants import BOUND_SLACK, LEMMA_TOLERANCE, STABILITY_LIMIT
from app.exceptions import BoxSizeError, CFLViolationError, GridError, MonotonicityError
from app.models.fields import CellField, FaceField
from app.models.grid import Grid
from app.models.kinetic import DefectDensity, KineticField, XiGrid
from app.services.field_calculus import face_difference, face_to_cell, laplacian
from app.services.hyperbolic import FluxLaw
from app.utils.logger import setup_logger

logger = setup_logger("kinetic")


class KineticToolkit:
    """Operations on kinetic fields f(cell, xi) over a uniform xi grid."""

    def __init__(self, flux_law: FluxLaw | None = None):
        self.law = flux_law or FluxLaw()

    # Lift and collapse

    @staticmethod
    def lift_values(u: np.ndarray, xi: XiGrid) -> np.ndarray:
        """f[..., j] = fraction of bin j lying below u (exact integral u)."""
        edges = xi.edges[:-1]
        return np.clip((u[..., np.newaxis] - edges) / xi.width, 0.0, 1.0)

    def lift_indicator(self, u: CellField, xi: XiGrid) -> KineticField:
        """Single-slab kinetic field of 1{xi < u} with a fractional straddle bin."""
        return KineticField(u.grid, xi, self.lift_values(u.values, xi)[np.newaxis])

    @staticmethod
    def integrate(f: KineticField) -> np.ndarray:
        """dxi * sum_j f per slab and cell."""
        return f.xi.width * f.values.sum(axis=-1)

    def collapse_to_indicator(
        self, f: KineticField
    ) -> tuple[CellField, KineticField, DefectDensity]:
        """
        Project f back onto indicator profiles.

        u = dxi sum_j f; f' = lift(u); the defect is the running integral
        m_j = dxi sum_{k <= j} (f' - f)_k, nonnegative for any f in [0, 1]
        because the partial sums of f never exceed min(xi, u).

        Only single-slab fields can be collapsed.
        """
        if f.slabs != 1:
            raise GridError("collapse_to_indicator expects a single-slab kinetic field")
        values = f.values[0]
        u_values = np.clip(f.xi.width * values.sum(axis=-1), 0.0, 1.0)
        lifted = self.lift_values(u_values, f.xi)
        running = f.xi.width * np.cumsum(lifted - values, axis=-1)
        # round-off only
        m = np.maximum(running, 0.0)
        u = CellField(f.grid, u_values, kind="density")
        return (
            u,
            KineticField(f.grid, f.xi, lifted[np.newaxis]),
            DefectDensity(f.grid, f.xi, m),
        )

    # rho functional and its bound

    @staticmethod
    def rho_values(f: KineticField) -> np.ndarray:
        """
        rho_j = xi_j f_j + integral of f over (xi_j, 1), exact for
        piecewise-constant f (half of bin j plus all bins above).
        """
        values = f.values
        width = f.xi.width
        above = np.flip(np.cumsum(np.flip(values, axis=-1), axis=-1), axis=-1) - values
        return f.xi.centers * values + width * (0.5 * values + above)

    def rho_from_f(self, f: KineticField) -> KineticField:
        """rho as a kinetic field (values stay in [0, 1])."""
        return KineticField(f.grid, f.xi, np.clip(self.rho_values(f), 0.0, 1.0))

    @staticmethod
    def support_edge(f: KineticField) -> float:
        """Upper edge of the highest bin where f is positive anywhere."""
        occupied = np.nonzero(np.any(f.values > 0.0, axis=tuple(range(f.values.ndim - 1))))[0]
        if occupied.size == 0:
            return 0.0
        return float(f.xi.edges[occupied[-1] + 1])

    def rho_bound_check(self, f: KineticField, c_sup: float | None = None) -> float:
        """
        Worst violation of 0 <= rho - u f <= C f (1 - f).

        Args:
            f: Kinetic field, nonincreasing in xi in every slab and cell
            c_sup: Bound constant; defaults to the upper edge of the discrete
                support (the smallest constant valid for binned fields)

        Returns:
            max over slabs, cells and bins of the upper and lower violations

        Raises:
            MonotonicityError: If f increases in xi somewhere
        """
        if not f.is_monotone(LEMMA_TOLERANCE):
            worst = float(np.diff(f.values, axis=-1).max())
            logger.error("Kinetic field increases in xi by %.3e", worst)
            raise MonotonicityError(f"f is not nonincreasing in xi (increase {worst:.3e})")
        c = self.support_edge(f) if c_sup is None else c_sup
        u = self.integrate(f)[..., np.newaxis]
        gap = self.rho_values(f) - u * f.values
        upper = np.maximum(gap - c * f.values * (1.0 - f.values), 0.0)
        lower = np.maximum(-gap, 0.0)
        return float(max(upper.max(initial=0.0), lower.max(initial=0.0)))

    @staticmethod
    def rigidity_defect(f: KineticField) -> float:
        """dxi sum (f - f^2) cell volume, averaged over slabs."""
        values = f.values
        total = float((values - values * values).sum())
        return total * f.xi.width * f.grid.cell_volume / f.slabs

    # Box averaging

    def box_average(
        self,
        snapshots: Sequence[CellField],
        box_cells: int | Sequence[int],
        box_steps: int,
        xi: XiGrid,
    ) -> KineticField:
        """
        Mean of the lifted snapshots over space-time boxes.

        Args:
            snapshots: Densities on a common grid, in time order
            box_cells: Box width in cells (per axis or one value for all)
            box_steps: Box length in snapshots
            xi: Kinetic grid

        Returns:
            Kinetic field on the coarse grid, one slab per time box

        Raises:
            BoxSizeError: If the boxes do not tile the grid or the snapshot list
        """
        if not snapshots:
            raise BoxSizeError("box_average needs at least one snapshot")
        grid = snapshots[0].grid
        if any(s.grid != grid for s in snapshots):
            raise GridError("Snapshots live on different grids")
        widths = (
            (int(box_cells),) * grid.dim
            if isinstance(box_cells, int)
            else tuple(int(b) for b in box_cells)
        )
        if len(widths) != grid.dim or any(b < 1 for b in widths) or box_steps < 1:
            raise BoxSizeError(f"Invalid box size {widths} x {box_steps}")
        if any(n % b for n, b in zip(grid.cells, widths, strict=True)):
            raise BoxSizeError(f"Box width {widths} does not divide grid {grid.cells}")
        if len(snapshots) % box_steps:
            raise BoxSizeError(
                f"Box length {box_steps} does not divide {len(snapshots)} snapshots"
            )

        stack = self.lift_values(np.stack([s.values for s in snapshots]), xi)
        shape: list[int] = [len(snapshots) // box_steps, box_steps]
        for n, b in zip(grid.cells, widths, strict=True):
            shape += [n // b, b]
        shape.append(xi.bins)
        mean_axes = tuple(range(1, 2 * grid.dim + 2, 2))
        averaged = stack.reshape(shape).mean(axis=mean_axes)

        coarse = Grid(
            lengths=grid.lengths,
            cells=tuple(n // b for n, b in zip(grid.cells, widths, strict=True)),
            boundary=grid.boundary,
        )
        return KineticField(coarse, xi, averaged)

    # Semi-Lagrangian transport-collapse

    def velocities(
        self, S: CellField, velocity: FaceField, xi: XiGrid
    ) -> tuple[list[np.ndarray], np.ndarray]:
        """
        Characteristic speeds at (cell, bin): y' = g'(xi) grad S, xi' = (xi - S) g(xi).
        """
        grid = S.grid
        centers = xi.centers
        g_prime = self.law.g_prime(centers)
        y_speeds = [
            face_to_cell(grid, velocity.components[axis], axis)[..., np.newaxis] * g_prime
            for axis in range(grid.dim)
        ]
        xi_speed = (centers - S.values[..., np.newaxis]) * self.law.g(centers)
        return y_speeds, xi_speed

    def courant_numbers(
        self, S: CellField, velocity: FaceField, xi: XiGrid, dt: float
    ) -> list[float]:
        """Largest displacement of a characteristic foot per axis, in cells or bins."""
        y_speeds, xi_speed = self.velocities(S, velocity, xi)
        numbers = [
            dt * float(np.abs(v).max()) / h
            for v, h in zip(y_speeds, S.grid.spacing, strict=True)
        ]
        numbers.append(dt * float(np.abs(xi_speed).max()) / xi.width)
        return numbers

    def transport(
        self,
        f: KineticField,
        S: CellField,
        velocity: FaceField,
        dt: float,
        epsilon: float = 0.0,
    ) -> KineticField:
        """
        One backward-characteristic step with multilinear interpolation in (y, xi).

        Outside xi in [0, 1] the field takes f = 1 below and f = 0 above.
        With eps > 0 every xi-slice is then diffused explicitly.

        Raises:
            CFLViolationError: If a foot leaves the neighbouring cell or bin
        """
        if f.slabs != 1:
            raise GridError("transport expects a single-slab kinetic field")
        grid = f.grid
        xi = f.xi
        numbers = self.courant_numbers(S, velocity, xi, dt)
        if dt <= 0.0 or max(numbers) > STABILITY_LIMIT * (1.0 + 1e-9):
            logger.error("Kinetic step rejected: dt=%.3e, Courant numbers %s", dt, numbers)
            raise CFLViolationError(
                f"Kinetic step {dt:.3e} moves a characteristic foot more than one cell or bin"
            )

        # One ghost layer per axis: wrap or edge copy in y, f = 1 / f = 0 in xi
        values = f.values[0]
        y_mode = "wrap" if grid.is_periodic else "edge"
        padded = np.pad(values, [(1, 1)] * grid.dim + [(0, 0)], mode=y_mode)
        padded = np.pad(padded, [(0, 0)] * grid.dim + [(1, 0)], constant_values=1.0)
        padded = np.pad(padded, [(0, 0)] * grid.dim + [(0, 1)], constant_values=0.0)

        y_speeds, xi_speed = self.velocities(S, velocity, xi)
        index = np.indices(values.shape, dtype=float)
        coords = []
        for axis, h in enumerate(grid.spacing):
            coords.append(index[axis] + 1.0 - dt * y_speeds[axis] / h)
        coords.append(index[grid.dim] + 1.0 - dt * xi_speed / xi.width)
        moved = map_coordinates(padded, np.stack(coords), order=1, mode="nearest")
        moved = np.clip(moved, 0.0, 1.0)

        if epsilon > 0.0:
            moved = self._diffuse_slices(grid, moved, epsilon, dt)
        return KineticField(grid, xi, moved[np.newaxis])

    @staticmethod
    def _diffuse_slices(grid: Grid, values: np.ndarray, epsilon: float, dt: float) -> np.ndarray:
        out = np.empty_like(values)
        for j in range(values.shape[-1]):
            out[..., j] = values[..., j] + epsilon * dt * laplacian(grid, values[..., j])
        return np.clip(out, 0.0, 1.0)

    def kinetic_step(
        self,
        f: KineticField,
        S: CellField,
        dt: float,
        velocity: FaceField | None = None,
        epsilon: float = 0.0,
    ) -> KineticField:
        """Transport f along characteristics for dt, then collapse to an indicator."""
        if velocity is None:
            velocity = FaceField(
                S.grid,
                tuple(
                    face_difference(S.grid, S.values, axis) / h
                    for axis, h in enumerate(S.grid.spacing)
                ),
            )
        moved = self.transport(f, S, velocity, dt, epsilon)
        return self.collapse_to_indicator(moved)[1]

    @staticmethod
    def is_indicator(f: KineticField, tol: float = BOUND_SLACK) -> bool:
        """True when at most one bin per cell is strictly between 0 and 1."""
        partial = (f.values > tol) & (f.values < 1.0 - tol)
        return bool(np.all(partial.sum(axis=-1) <= 1))
