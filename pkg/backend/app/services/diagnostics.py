"""
Diagnostics on computed states and trajectories: Kruzkov entropy residuals,
defect measures, free energy and dissipation, steady-state residuals and
plateau structure.
"""

from collections.abc import Sequence
from typing import Literal

import numpy as np
from scipy import ndimage

from app.constants import (
    ENERGY_CUMULATIVE_SLACK,
    ENERGY_DROP_FACTOR,
    ENERGY_NORM_FACTOR,
    ENTROPY_GATE_FACTOR,
    LEMMA_TOLERANCE,
    PLATEAU_HIGH,
    PLATEAU_LOW,
    SONIC_POINT,
)
from app.exceptions import EllipticSolverError
from app.models.fields import CellField, FaceField, require_same_grid
from app.models.grid import Grid
from app.models.kinetic import DefectDensity, XiGrid
from app.models.reports import (
    CheckReport,
    DiagnosticsRecord,
    EnergyCheck,
    EntropyAudit,
    SteadyStateResiduals,
)
from app.services.elliptic import EllipticSolver
from app.services.field_calculus import (
    cell_gradient,
    face_divergence,
    field_integral,
    laplacian,
    left_states,
    right_states,
)
from app.services.hyperbolic import ArrayLike, FiniteVolumeScheme, FluxLaw
from app.services.kinetic import KineticToolkit
from app.utils.logger import setup_logger

logger = setup_logger("diagnostics")

FaceState = Literal["godunov", "mean"]


def level_key(k: float) -> str:
    """Column suffix for a Kruzkov level (0.25 -> '0.25')."""
    return f"{k:g}"


class EntropyPair:
    """
    Kruzkov entropy eta_k(u) = |u - k| with flux q_k(u) = sign(u - k) (g(u) - g(k)).

    The source correction (u - S) [q_k - g eta_k'](u) reduces to
    -(u - S) sign(u - k) g(k).
    """

    def __init__(self, k: float, flux_law: FluxLaw | None = None):
        if not 0.0 <= k <= 1.0:
            raise ValueError(f"Kruzkov level {k} outside [0, 1]")
        self.k = k
        self.law = flux_law or FluxLaw()

    def eta(self, u: ArrayLike) -> np.ndarray:
        return np.abs(np.asarray(u, dtype=float) - self.k)

    def eta_prime(self, u: ArrayLike) -> np.ndarray:
        return np.sign(np.asarray(u, dtype=float) - self.k)

    def q(self, u: ArrayLike) -> np.ndarray:
        return self.eta_prime(u) * (self.law.g(u) - self.law.g(self.k))

    def correction(
        self, u: ArrayLike, S: ArrayLike, sign_state: ArrayLike | None = None
    ) -> np.ndarray:
        """Closed form -(u - S) sign(w - k) g(k), with w = u unless given."""
        w = u if sign_state is None else sign_state
        u_arr = np.asarray(u, dtype=float)
        return -(u_arr - np.asarray(S, dtype=float)) * self.eta_prime(w) * self.law.g(self.k)

    def correction_from_definition(self, u: ArrayLike, S: ArrayLike) -> np.ndarray:
        """(u - S) (q_k(u) - g(u) eta_k'(u)), evaluated term by term."""
        u_arr = np.asarray(u, dtype=float)
        bracket = self.q(u_arr) - self.law.g(u_arr) * self.eta_prime(u_arr)
        return (u_arr - np.asarray(S, dtype=float)) * bracket

    def numerical_flux(
        self, scheme: FiniteVolumeScheme, uL: ArrayLike, uR: ArrayLike, a: ArrayLike
    ) -> np.ndarray:
        """Entropy flux F(uL v k, uR v k) - F(uL ^ k, uR ^ k) of a monotone face flux."""
        uL = np.asarray(uL, dtype=float)
        uR = np.asarray(uR, dtype=float)
        return scheme.face_flux(np.maximum(uL, self.k), np.maximum(uR, self.k), a) - (
            scheme.face_flux(np.minimum(uL, self.k), np.minimum(uR, self.k), a)
        )


class Diagnostics:
    """Diagnostics bound to one face-flux scheme and elliptic solver."""

    def __init__(
        self,
        scheme: FiniteVolumeScheme | None = None,
        solver: EllipticSolver | None = None,
        face_state: FaceState = "mean",
    ):
        self.scheme = scheme or FiniteVolumeScheme()
        self.law = self.scheme.law
        self.solver = solver or EllipticSolver()
        self.face_state = face_state
        self.kinetic = KineticToolkit(self.law)

    # Entropy

    def kruzkov_residual(
        self,
        u_old: CellField,
        u_new: CellField,
        S: CellField,
        velocity: FaceField,
        dt: float,
        k: float,
        epsilon: float = 0.0,
        u_mid: CellField | None = None,
    ) -> CellField:
        """
        Cellwise discrete entropy residual of one step for the level k.

        [eta(u_new) - eta(u_old)] / dt + div(Q_k) + c_k - eps Laplacian eta(u_mid),
        with c_k = -(u_old - S) sign(u_mid - k) g(k) and u_mid the state after
        transport (equal to u_new without viscosity). The positive part
        measures the violation of the entropy inequality.
        """
        grid = require_same_grid(u_old, u_new, S, velocity)
        mid = u_new if u_mid is None else u_mid
        pair = EntropyPair(k, self.law)
        residual = (pair.eta(u_new.values) - pair.eta(u_old.values)) / dt
        for axis, h in enumerate(grid.spacing):
            q = pair.numerical_flux(
                self.scheme,
                left_states(grid, u_old.values, axis),
                right_states(grid, u_old.values, axis),
                velocity.components[axis],
            )
            residual += face_divergence(grid, q, axis) / h
        residual += pair.correction(u_old.values, S.values, sign_state=mid.values)
        if epsilon > 0.0:
            residual -= epsilon * laplacian(grid, pair.eta(mid.values))
        return CellField(grid, residual)

    # Defect measure

    @staticmethod
    def defect_cell_values(u: CellField, epsilon: float) -> np.ndarray:
        grads = cell_gradient(u.grid, u.values)
        return epsilon * sum(g * g for g in grads)

    def defect_mass(self, u: CellField, epsilon: float) -> float:
        """eps sum |grad u|^2 cell volume (0 for the hyperbolic system)."""
        if epsilon == 0.0:
            return 0.0
        return float(self.defect_cell_values(u, epsilon).sum()) * u.grid.cell_volume

    def defect_density(self, u: CellField, epsilon: float, xi: XiGrid) -> DefectDensity:
        """Deposit eps |grad u_i|^2 into the xi-bin holding u_i, as a density in xi."""
        values = np.zeros(u.grid.shape + (xi.bins,))
        if epsilon > 0.0:
            cell = self.defect_cell_values(u, epsilon)
            bins = np.minimum((u.values / xi.width).astype(int), xi.bins - 1)
            np.put_along_axis(values, bins[..., np.newaxis], cell[..., np.newaxis] / xi.width, axis=-1)
        return DefectDensity(u.grid, xi, values)

    # Free energy

    @staticmethod
    def free_energy(u: CellField, S: CellField) -> float:
        """
        E = integral of u S.

        For S solved from u this is the discrete ||S||^2_H1 (summation by
        parts); energy_and_norm returns both and checks the agreement.
        """
        require_same_grid(u, S)
        return field_integral(CellField(u.grid, u.values * S.values))

    def energy_and_norm(self, u: CellField, S: CellField) -> tuple[float, float]:
        """
        E and ||S||^2_H1 for a solved pair.

        Raises:
            EllipticSolverError: If they differ by more than dx^2 |domain|
        """
        energy = self.free_energy(u, S)
        norm = self.h1_norm_squared(S)
        allowed = ENERGY_NORM_FACTOR * u.grid.min_spacing**2 * u.grid.volume
        if abs(energy - norm) > allowed:
            raise EllipticSolverError(
                f"E = {energy:.12g} and ||S||^2_H1 = {norm:.12g} differ by more than {allowed:.3e}"
            )
        return energy, norm

    def h1_norm_squared(self, S: CellField) -> float:
        """Discrete ||S||^2_H1 = sum S^2 vol + sum over faces |grad S|^2 vol."""
        velocity = self.solver.face_gradient(S)
        vol = S.grid.cell_volume
        faces = sum(float((c * c).sum()) for c in velocity.components)
        return field_integral(CellField(S.grid, S.values * S.values)) + faces * vol

    def face_mobility(
        self, u: CellField, velocity: FaceField, axis: int, face_state: FaceState | None = None
    ) -> np.ndarray:
        """g at the face state used for the dissipation (arithmetic mean or Godunov state)."""
        grid = u.grid
        uL = left_states(grid, u.values, axis)
        uR = right_states(grid, u.values, axis)
        if (face_state or self.face_state) == "mean":
            return self.law.g(0.5 * (uL + uR))
        return self.law.g(self.law.godunov_state(uL, uR, velocity.components[axis]))

    def dissipation_rate(
        self, u: CellField, S: CellField, face_state: FaceState | None = None
    ) -> float:
        """
        D = 2 sum over faces |grad S . n|^2 g(u_face) face volume (>= 0).

        The configured face state applies unless one is passed. With the
        Godunov state a 0 -> 1 interface facing up the gradient of S costs
        nothing; the mean charges it g(1/2) on one face.
        """
        require_same_grid(u, S)
        velocity = self.solver.face_gradient(S)
        total = 0.0
        for axis in range(u.grid.dim):
            a = velocity.components[axis]
            total += float((a * a * self.face_mobility(u, velocity, axis, face_state)).sum())
        return 2.0 * total * u.grid.cell_volume

    @staticmethod
    def viscous_rate(u: CellField, S: CellField, epsilon: float) -> float:
        """Viscous part 2 eps integral of u (S - u) of dE/dt."""
        if epsilon == 0.0:
            return 0.0
        return 2.0 * epsilon * field_integral(CellField(u.grid, u.values * (S.values - u.values)))

    def energy_identity_check(
        self, records: Sequence[DiagnosticsRecord], grid: Grid, epsilon: float = 0.0
    ) -> EnergyCheck:
        """
        Compare E(t_n+1) - E(t_n) with dt (D + viscous rate) on consecutive rows.

        Monotonicity of E is gated only for eps = 0; the cumulative dissipation
        must stay below |domain| / 2 + 0.02.
        """
        max_deviation = 0.0
        worst_drop = 0.0
        monotone = True
        for prev, cur in zip(records, records[1:], strict=False):
            dt = prev.dt
            if dt <= 0.0:
                continue
            change = cur.energy - prev.energy
            deviation = abs(change - dt * (prev.dissipation + prev.viscous_rate)) / dt
            max_deviation = max(max_deviation, deviation)
            worst_drop = min(worst_drop, change)
            allowed = ENERGY_DROP_FACTOR * (grid.min_spacing + dt) * dt
            if epsilon == 0.0 and change < -allowed:
                monotone = False
        cumulative = records[-1].cumulative_dissipation if records else 0.0
        bound = 0.5 * grid.volume + ENERGY_CUMULATIVE_SLACK
        return EnergyCheck(
            max_deviation=max_deviation,
            worst_drop=worst_drop,
            monotone=monotone,
            cumulative_dissipation=cumulative,
            cumulative_bound=bound,
            within_bound=cumulative <= bound,
        )

    # Steady states

    def steady_state_residuals(self, u: CellField, S: CellField) -> SteadyStateResiduals:
        """
        R_transport = L1 norm of div(a F), R_elliptic = max elliptic residual,
        R_support = integral of |grad S|^2 g(u) at the Godunov face state, plus the
        largest face flux.
        """
        grid = require_same_grid(u, S)
        velocity = self.solver.face_gradient(S)
        divergence = self.scheme.flux_divergence(u.values, velocity)
        transport = float(np.abs(divergence).sum()) * grid.cell_volume
        elliptic = float(np.abs(self.solver.elliptic_residual(u, S).values).max())
        fluxes = self.scheme.face_fluxes(u.values, velocity)
        max_flux = max(float(np.abs(f).max()) if f.size else 0.0 for f in fluxes)
        return SteadyStateResiduals(
            transport=transport,
            elliptic=elliptic,
            support=0.5 * self.dissipation_rate(u, S, "godunov"),
            max_face_flux=max_flux,
        )

    # Plateaus

    @staticmethod
    def intermediate_fraction(u: CellField) -> float:
        """Share of cells with PLATEAU_LOW < u < PLATEAU_HIGH."""
        inside = (u.values > PLATEAU_LOW) & (u.values < PLATEAU_HIGH)
        return float(inside.sum()) / u.grid.n_cells

    @staticmethod
    def count_plateaus(u: CellField) -> int:
        """
        Number of connected regions with u >= 1/2 that reach PLATEAU_HIGH.

        Regions touching across a periodic boundary count once.
        """
        grid = u.grid
        labels, count = ndimage.label(u.values >= SONIC_POINT)
        if count == 0:
            return 0
        parent = list(range(count + 1))

        def find(i: int) -> int:
            while parent[i] != i:
                parent[i] = parent[parent[i]]
                i = parent[i]
            return i

        if grid.is_periodic:
            for axis in range(grid.dim):
                first = np.take(labels, 0, axis=axis).ravel()
                last = np.take(labels, -1, axis=axis).ravel()
                for a, b in zip(first, last, strict=True):
                    if a and b:
                        parent[find(int(a))] = find(int(b))

        high = ndimage.maximum(u.values, labels=labels, index=np.arange(1, count + 1))
        roots = {find(i + 1) for i, peak in enumerate(np.atleast_1d(high)) if peak >= PLATEAU_HIGH}
        return len(roots)

    # Snapshot audit

    def entropy_audit(
        self,
        u: CellField,
        levels: Sequence[float],
        cfl: float,
        epsilon: float = 0.0,
    ) -> EntropyAudit:
        """Take one step from u and gate the positive Kruzkov residuals by 5 (dx + dt)."""
        S, _ = self.solver.solve_potential(u)
        velocity = self.solver.face_gradient(S)
        dt = self.scheme.cfl_time_step(u, velocity, epsilon, cfl, cap=1.0)
        u_mid, _ = self.scheme.hyperbolic_step(u, velocity, dt)
        u_new = self.scheme.diffusion_step(u_mid, epsilon, dt)
        residuals = {
            level_key(k): float(
                np.maximum(
                    self.kruzkov_residual(u, u_new, S, velocity, dt, k, epsilon, u_mid).values,
                    0.0,
                ).max()
            )
            for k in levels
        }
        return EntropyAudit(
            dt=dt,
            threshold=ENTROPY_GATE_FACTOR * (u.grid.min_spacing + dt),
            residuals=residuals,
        )

    def audit(
        self,
        t: float,
        u: CellField,
        xi: XiGrid,
        levels: Sequence[float],
        cfl: float,
        epsilon: float = 0.0,
    ) -> CheckReport:
        """Steady-state residuals, the f (1 - f) bound on the lift and an entropy audit."""
        S, _ = self.solver.solve_potential(u)
        steady = self.steady_state_residuals(u, S)
        lemma = self.kinetic.rho_bound_check(self.kinetic.lift_indicator(u, xi))
        entropy = self.entropy_audit(u, levels, cfl, epsilon)
        passed = lemma <= LEMMA_TOLERANCE and entropy.passed
        logger.info(
            "Audit at t=%s: R_support=%.3e, lemma violation=%.3e, entropy %s",
            t,
            steady.support,
            lemma,
            "ok" if entropy.passed else "FAILED",
        )
        return CheckReport(
            t=t, grid=u.grid.spec, steady=steady, lemma_violation=lemma, entropy=entropy, passed=passed
        )
