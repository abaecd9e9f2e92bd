"""
Flux law g(u) = u (1 - u), entropic face fluxes and the explicit finite-volume steps.
"""

from typing import Literal

import numpy as np

from app.constants import (
    BOUND_SLACK,
    MAX_CFL,
    MAX_WAVE_SPEED,
    SONIC_POINT,
    STABILITY_LIMIT,
)
from app.exceptions import CFLViolationError, ConfigurationError, FieldBoundsError
from app.models.fields import CellField, FaceField, bound_excess, require_same_grid
from app.models.grid import Grid
from app.models.reports import StepReport
from app.services.field_calculus import (
    face_divergence,
    field_integral,
    laplacian,
    left_states,
    right_states,
)
from app.utils.logger import setup_logger

logger = setup_logger("hyperbolic")

FluxScheme = Literal["godunov", "lax-friedrichs"]
ArrayLike = np.ndarray | float


class FluxLaw:
    """The quorum-sensing flux g(u) = u (1 - u) with sonic point 1/2."""

    sonic_point = SONIC_POINT

    @staticmethod
    def g(u: ArrayLike) -> np.ndarray:
        u = np.asarray(u, dtype=float)
        return u * (1.0 - u)

    @staticmethod
    def g_prime(u: ArrayLike) -> np.ndarray:
        return 1.0 - 2.0 * np.asarray(u, dtype=float)

    @staticmethod
    def check_states(*states: ArrayLike) -> None:
        """Reject face states outside [0, 1] beyond the bound slack."""
        for s in states:
            excess = bound_excess(np.atleast_1d(np.asarray(s, dtype=float)))
            if excess > BOUND_SLACK:
                logger.error("Face state leaves [0, 1] by %.3e", excess)
                raise FieldBoundsError(f"Face state outside [0, 1] by {excess:.3e}")

    def godunov_state(self, uL: ArrayLike, uR: ArrayLike, a: ArrayLike) -> np.ndarray:
        """
        State selected by the exact Riemann solver for h(u) = a g(u).

        For uL <= uR the flux is the minimum of h over [uL, uR], otherwise
        the maximum over [uR, uL]; the extremum sits at an endpoint or at
        the sonic point when it lies inside. Ties go to uL.
        """
        uL, uR, a = np.broadcast_arrays(
            np.asarray(uL, dtype=float), np.asarray(uR, dtype=float), np.asarray(a, dtype=float)
        )
        lo = np.minimum(uL, uR)
        hi = np.maximum(uL, uR)
        sonic = np.clip(self.sonic_point, lo, hi)
        candidates = np.stack([uL, uR, sonic])
        h = a * self.g(candidates)
        pick = np.where(uL <= uR, np.argmin(h, axis=0), np.argmax(h, axis=0))
        return np.take_along_axis(candidates, pick[np.newaxis], axis=0)[0]

    def godunov_flux(self, uL: ArrayLike, uR: ArrayLike, a: ArrayLike) -> np.ndarray:
        """Exact Riemann flux for h(u) = a u (1 - u)."""
        self.check_states(uL, uR)
        return np.asarray(a, dtype=float) * self.g(self.godunov_state(uL, uR, a))

    def lax_friedrichs_flux(
        self, uL: ArrayLike, uR: ArrayLike, a: ArrayLike
    ) -> np.ndarray:
        """Local Lax-Friedrichs (Rusanov) flux with wave-speed bound |a|."""
        self.check_states(uL, uR)
        uL = np.asarray(uL, dtype=float)
        uR = np.asarray(uR, dtype=float)
        a = np.asarray(a, dtype=float)
        return 0.5 * a * (self.g(uL) + self.g(uR)) - 0.5 * np.abs(a) * MAX_WAVE_SPEED * (
            uR - uL
        )


class FiniteVolumeScheme:
    """
    First-order conservative scheme for u_t + div(grad S g(u)) = 0 plus
    explicit diffusion for the viscous approximation.
    """

    def __init__(self, flux: FluxScheme = "godunov", flux_law: FluxLaw | None = None):
        if flux not in ("godunov", "lax-friedrichs"):
            raise ConfigurationError("numerics.flux", f"unknown flux scheme '{flux}'")
        self.flux = flux
        self.law = flux_law or FluxLaw()

    def face_flux(self, uL: ArrayLike, uR: ArrayLike, a: ArrayLike) -> np.ndarray:
        if self.flux == "godunov":
            return self.law.godunov_flux(uL, uR, a)
        return self.law.lax_friedrichs_flux(uL, uR, a)

    def face_fluxes(self, u: np.ndarray, velocity: FaceField) -> tuple[np.ndarray, ...]:
        """Numerical flux at every face, per axis (walls carry zero flux)."""
        grid = velocity.grid
        return tuple(
            self.face_flux(
                left_states(grid, u, axis), right_states(grid, u, axis), velocity.components[axis]
            )
            for axis in range(grid.dim)
        )

    def flux_divergence(self, u: np.ndarray, velocity: FaceField) -> np.ndarray:
        """Discrete div(a F) per cell, divided by the spacing."""
        grid = velocity.grid
        fluxes = self.face_fluxes(u, velocity)
        out = np.zeros(grid.shape)
        for axis, h in enumerate(grid.spacing):
            out += face_divergence(grid, fluxes[axis], axis) / h
        return out

    @staticmethod
    def transport_rate(velocity: FaceField) -> float:
        """
        Inverse of the largest monotone transport step.

        Per axis the larger of max|a| / h (one face upwinding from the cell)
        and max|a_R - a_L| / h (both faces drawing on the cell where the
        velocity diverges) bounds the loss coefficient; axes add up.
        """
        grid = velocity.grid
        rate = 0.0
        for axis, h in enumerate(grid.spacing):
            comp = velocity.components[axis]
            if comp.size == 0:
                continue
            wave = float(np.abs(comp).max()) * MAX_WAVE_SPEED / h
            spread = float(np.abs(face_divergence(grid, comp, axis)).max()) / h
            rate += max(wave, spread)
        return rate

    @staticmethod
    def diffusion_rate(grid: Grid, epsilon: float) -> float:
        """2 eps sum over axes of 1 / h^2 (equals 2 dim eps / h^2 on square cells)."""
        return sum(2.0 * epsilon / (h * h) for h in grid.spacing)

    def cfl_time_step(
        self,
        u: CellField,
        velocity: FaceField,
        epsilon: float,
        cfl: float,
        cap: float | None = None,
    ) -> float:
        """
        Stable time step nu / (transport rate + diffusion rate).

        Args:
            u: Current density
            velocity: Face velocities a = grad S . n
            epsilon: Viscosity
            cfl: CFL number nu in (0, 0.95]
            cap: Time left to the next output time (or final time)

        Returns:
            Time step, at most `cap`; when nothing moves the cap itself
        """
        require_same_grid(u, velocity)
        if not 0.0 < cfl <= MAX_CFL:
            raise ConfigurationError("numerics.cfl", f"CFL number {cfl} outside (0, {MAX_CFL}]")
        rate = self.transport_rate(velocity) + self.diffusion_rate(u.grid, epsilon)
        if rate == 0.0:
            if cap is None:
                raise CFLViolationError("No motion and no output cap: time step is unbounded")
            return cap
        dt = cfl / rate
        return dt if cap is None else min(dt, cap)

    def _check_transport_step(self, velocity: FaceField, dt: float) -> None:
        courant = dt * self.transport_rate(velocity)
        if dt <= 0.0 or courant > STABILITY_LIMIT * (1.0 + 1e-9):
            logger.error("Transport step rejected: dt=%.3e, Courant number %.4f", dt, courant)
            raise CFLViolationError(
                f"Time step {dt:.3e} violates the transport CFL bound (Courant {courant:.4f})"
            )

    def hyperbolic_step(
        self, u: CellField, velocity: FaceField, dt: float
    ) -> tuple[CellField, StepReport]:
        """
        Conservative update u - dt div(a F) with the face velocity frozen.

        Raises:
            CFLViolationError: If dt exceeds the monotone transport step
        """
        grid = require_same_grid(u, velocity)
        self._check_transport_step(velocity, dt)
        raw = u.values - dt * self.flux_divergence(u.values, velocity)
        violation = bound_excess(raw)
        u_new = CellField(grid, np.clip(raw, 0.0, 1.0), kind="density")
        report = StepReport(
            dt=dt,
            max_face_speed=velocity.max_abs(),
            mass_before=field_integral(u),
            mass_after=field_integral(u_new),
            bound_violation=violation,
        )
        if violation > BOUND_SLACK:
            logger.warning("Transport step left [0, 1] by %.3e", violation)
        return u_new, report

    def diffusion_step(self, u: CellField, epsilon: float, dt: float) -> CellField:
        """
        Explicit heat step u + eps dt Laplacian_h u.

        Raises:
            CFLViolationError: If 2 dim eps dt / h^2 exceeds the CFL ceiling
        """
        if epsilon == 0.0:
            return u
        number = dt * self.diffusion_rate(u.grid, epsilon)
        if number > MAX_CFL * (1.0 + 1e-9):
            logger.error("Diffusion step rejected: stability number %.4f", number)
            raise CFLViolationError(
                f"Diffusion step {dt:.3e} unstable for eps={epsilon} (number {number:.4f})"
            )
        raw = u.values + epsilon * dt * laplacian(u.grid, u.values)
        return CellField(u.grid, np.clip(raw, 0.0, 1.0), kind="density")
