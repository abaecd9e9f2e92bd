"""
Time loop for the coupled system: potential solve, transport, diffusion, diagnostics.
"""

import math

import numpy as np

from app.constants import BOUND_ABORT, ENTROPY_GATE_FACTOR, TIME_EPSILON
from app.exceptions import BoundViolationError, EntropyGateError
from app.models.fields import CellField, FaceField
from app.models.grid import Grid, grid_from_spec
from app.models.kinetic import KineticField, XiGrid
from app.models.reports import DiagnosticsRecord, Snapshot, StepReport, Trajectory
from app.models.sim_config import SimConfig
from app.services.diagnostics import Diagnostics, level_key
from app.services.elliptic import EllipticSolver
from app.services.field_calculus import field_integral
from app.services.hyperbolic import FiniteVolumeScheme
from app.services.initial_data import initial_data
from app.services.kinetic import KineticToolkit
from app.utils.logger import setup_logger

logger = setup_logger("simulator")


class Simulator:
    """
    Runs one configuration to its final time.

    Per step: S from the elliptic solve, face velocities, CFL step, transport
    (finite volume or kinetic transport-collapse), diffusion when eps > 0,
    then one diagnostics row. Snapshots are kept at every multiple of the
    snapshot interval and at the final time.
    """

    def __init__(self, config: SimConfig):
        self.config = config
        numerics = config.numerics
        self.grid: Grid = grid_from_spec(config.grid.to_spec())
        self.solver = EllipticSolver(numerics.elliptic_tol)
        self.scheme = FiniteVolumeScheme(numerics.flux)
        self.diagnostics = Diagnostics(self.scheme, self.solver, numerics.face_state)
        self.kinetic = KineticToolkit(self.scheme.law)
        self.xi = XiGrid(bins=numerics.xi_bins)
        self.levels = list(numerics.kruzkov_levels)

    def initial_state(self) -> CellField:
        """u0 from the configured preset."""
        initial = self.config.physics.initial
        return initial_data(initial.preset, initial.params, self.grid)

    def advance(self, u0: CellField | None = None) -> Trajectory:
        """
        Integrate from u0 (or the configured preset) to the final time.

        Returns:
            Trajectory with snapshots, one diagnostics row per step (plus the
            final state) and the transport step reports

        Raises:
            BoundViolationError: If u leaves [0, 1] by more than 1e-10
            EntropyGateError: If the strict cellwise entropy gate fails
        """
        config = self.config
        epsilon = config.physics.epsilon
        final_time = config.physics.final_time
        backend = config.numerics.backend
        interval = config.snapshot_interval
        u = self.initial_state() if u0 is None else u0

        logger.info(
            "Run start: backend=%s, grid=%s, eps=%s, T=%s",
            backend,
            self.grid.cells,
            epsilon,
            final_time,
        )

        trajectory = Trajectory(epsilon=epsilon, backend=backend)
        f: KineticField | None = None
        if backend == "kinetic":
            f = self.kinetic.lift_indicator(u, self.xi)

        t = 0.0
        step = 0
        cumulative = 0.0
        output_index = 1
        S, _ = self.solver.solve_potential(u)
        trajectory.snapshots.append(Snapshot(0.0, u, S))
        entropy_warned = False

        while t < final_time * (1.0 - TIME_EPSILON):
            velocity = self.solver.face_gradient(S)
            target = min(output_index * interval, final_time)
            dt = self._time_step(u, S, velocity, epsilon, target - t)

            defect = 0.0
            if f is None:
                u_mid, report = self.scheme.hyperbolic_step(u, velocity, dt)
                u_new = self.scheme.diffusion_step(u_mid, epsilon, dt)
                defect = self.diagnostics.defect_mass(u, epsilon)
            else:
                moved = self.kinetic.transport(f, S, velocity, dt, epsilon)
                u_new, f, increment = self.kinetic.collapse_to_indicator(moved)
                u_mid = u_new
                defect = increment.total_mass
                report = StepReport(
                    dt=dt,
                    max_face_speed=velocity.max_abs(),
                    mass_before=field_integral(u),
                    mass_after=field_integral(u_new),
                )

            if report.bound_violation > BOUND_ABORT:
                logger.error(
                    "Bound violation %.3e at t=%s exceeds %.1e", report.bound_violation, t, BOUND_ABORT
                )
                raise BoundViolationError(
                    f"u left [0, 1] by {report.bound_violation:.3e} at t={t:.6g}"
                )

            residuals = self._entropy_residuals(u, u_new, u_mid, S, velocity, dt, epsilon)
            threshold = ENTROPY_GATE_FACTOR * (self.grid.min_spacing + dt)
            worst = max(residuals.values(), default=0.0)
            if f is None and worst > threshold:
                if config.numerics.strict_entropy:
                    logger.error("Entropy residual %.3e above %.3e at t=%s", worst, threshold, t)
                    raise EntropyGateError(
                        f"Cellwise entropy residual {worst:.3e} exceeds {threshold:.3e} at t={t:.6g}"
                    )
                if not entropy_warned:
                    logger.warning(
                        "Entropy residual %.3e above %.3e at t=%s (report only)", worst, threshold, t
                    )
                    entropy_warned = True

            dissipation = self.diagnostics.dissipation_rate(u, S)
            trajectory.records.append(
                DiagnosticsRecord(
                    step=step,
                    t=t,
                    dt=dt,
                    mass=field_integral(u),
                    energy=self.diagnostics.free_energy(u, S),
                    dissipation=dissipation,
                    viscous_rate=self.diagnostics.viscous_rate(u, S, epsilon),
                    cumulative_dissipation=cumulative,
                    entropy_residuals=residuals,
                    defect_mass=defect,
                    bound_violation=report.bound_violation,
                )
            )
            trajectory.step_reports.append(report)
            cumulative += dt * dissipation

            u = u_new
            step += 1
            t = target if math.isclose(t + dt, target, rel_tol=1e-12, abs_tol=1e-15) else t + dt
            S, _ = self.solver.solve_potential(u)
            if t >= target * (1.0 - TIME_EPSILON):
                t = target
                trajectory.snapshots.append(Snapshot(t, u, S))
                output_index += 1
                logger.debug("Snapshot %d at t=%s", len(trajectory.snapshots) - 1, t)

        trajectory.records.append(
            DiagnosticsRecord(
                step=step,
                t=t,
                mass=field_integral(u),
                energy=self.diagnostics.free_energy(u, S),
                dissipation=self.diagnostics.dissipation_rate(u, S),
                viscous_rate=self.diagnostics.viscous_rate(u, S, epsilon),
                cumulative_dissipation=cumulative,
                entropy_residuals={level_key(k): 0.0 for k in self.levels},
                defect_mass=self.diagnostics.defect_mass(u, epsilon) if f is None else 0.0,
            )
        )
        if trajectory.snapshots[-1].t != t:
            trajectory.snapshots.append(Snapshot(t, u, S))

        logger.info(
            "Run complete: %d steps, mass drift %.3e, cumulative dissipation %.6f",
            step,
            abs(trajectory.records[-1].mass - trajectory.records[0].mass),
            cumulative,
        )
        return trajectory

    def _time_step(
        self,
        u: CellField,
        S: CellField,
        velocity: FaceField,
        epsilon: float,
        remaining: float,
    ) -> float:
        """
        CFL step, shrunk so the remaining interval splits into equal steps.
        """
        cfl = self.config.numerics.cfl
        if self.config.numerics.backend == "kinetic":
            numbers = self.kinetic.courant_numbers(S, velocity, self.xi, 1.0)
            rate = sum(numbers) + self.scheme.diffusion_rate(self.grid, epsilon)
            dt = remaining if rate == 0.0 else min(cfl / rate, remaining)
        else:
            dt = self.scheme.cfl_time_step(u, velocity, epsilon, cfl, cap=remaining)
        if dt < remaining:
            dt = remaining / math.ceil(remaining / dt)
        return dt

    def _entropy_residuals(
        self,
        u_old: CellField,
        u_new: CellField,
        u_mid: CellField,
        S: CellField,
        velocity: FaceField,
        dt: float,
        epsilon: float,
    ) -> dict[str, float]:
        out = {}
        for k in self.levels:
            residual = self.diagnostics.kruzkov_residual(
                u_old, u_new, S, velocity, dt, k, epsilon, u_mid
            )
            out[level_key(k)] = float(np.maximum(residual.values, 0.0).max())
        return out
