"""
Studies that turn the qualitative theory into measurable gates: vanishing
viscosity ladders, rigidity defect decay, long-time plateaus, metastability,
entropy refinement, kinetic/finite-volume consistency and elliptic order.
"""

import math
from collections.abc import Callable, Mapping, Sequence
from concurrent.futures import ThreadPoolExecutor
from pathlib import Path

import numpy as np

from app.constants import (
    BOUND_SLACK,
    CONSTANT_STATE_TOL,
    DEFECT_GROWTH_FACTOR,
    DWELL_DISTANCE,
    DWELL_RATIO_GATE,
    ELLIPTIC_ORDER_RANGE,
    ENTROPY_GATE_FACTOR,
    ENTROPY_NOISE_FLOOR,
    ERROR_MESSAGES,
    FORMATION_DISSIPATION_FRACTION,
    INTERMEDIATE_FRACTION_GATE,
    LADDER_SLACK,
    LEMMA_TOLERANCE,
    REFINEMENT_RATIO_RANGE,
    RIGIDITY_REFINEMENT_RATIO,
    STEADY_DISSIPATION_TOL,
    STEADY_FLUX_TOL,
    STEADY_SUPPORT_TOL,
    STUDY_NAMES,
)
from app.exceptions import ConfigurationError
from app.models.fields import CellField
from app.models.grid import Grid, build_grid
from app.models.kinetic import XiGrid
from app.models.reports import StudyReport, Trajectory
from app.models.sim_config import SimConfig
from app.services.config_parser import config_hash
from app.services.diagnostics import Diagnostics
from app.services.elliptic import EllipticSolver
from app.services.field_calculus import field_integral
from app.services.hyperbolic import FiniteVolumeScheme
from app.services.kinetic import KineticToolkit
from app.services.simulator import Simulator
from app.services.snapshot_io import write_table, write_timeseries
from app.utils.logger import setup_logger

logger = setup_logger("experiments")

# Floor below which a measured distance or defect counts as zero
ZERO_FLOOR = 1e-14
# Mass conservation tolerance relative to |domain|
MASS_TOLERANCE = 1e-10
# Snapshots per run used for the rigidity box averages
RIGIDITY_SNAPSHOTS = 32

Row = dict[str, float | int | str]


def l1_distance(a: CellField, b: CellField) -> float:
    """Volume-weighted L1 distance of two fields on one grid."""
    return float(np.abs(a.values - b.values).sum()) * a.grid.cell_volume


def coarsen(u: CellField, factor: int) -> CellField:
    """Average u over blocks of factor cells per axis."""
    grid = u.grid
    blocks: list[int] = []
    for n in grid.shape:
        blocks.extend((n // factor, factor))
    values = u.values.reshape(blocks).mean(axis=tuple(range(1, 2 * grid.dim, 2)))
    coarse = build_grid(grid.lengths, tuple(n // factor for n in grid.shape), grid.boundary)
    return CellField(coarse, values, kind=u.kind)


def shift_to_boxes(snapshots: Sequence[CellField], offset: int) -> list[CellField]:
    """
    Snapshots seen from boxes starting `offset` cells in along every axis.

    Box grids are rolled; a walled grid is first mirrored across its far
    walls into a torus of twice the size per axis, so no box is cut short.
    """
    grid = snapshots[0].grid
    if offset == 0:
        return list(snapshots)
    axes = tuple(range(grid.dim))
    fields = list(snapshots)
    if not grid.is_periodic:
        torus = build_grid(
            tuple(2 * length for length in grid.lengths),
            tuple(2 * n for n in grid.cells),
            "periodic",
        )
        fields = []
        for s in snapshots:
            values = s.values
            for axis in axes:
                values = np.concatenate([values, np.flip(values, axis=axis)], axis=axis)
            fields.append(CellField(torus, values, kind=s.kind))
    return [f.with_values(np.roll(f.values, -offset, axis=axes)) for f in fields]


def checkerboard_snapshots(grid: Grid, count: int) -> list[CellField]:
    """Alternating 0/1 cells whose pattern flips every snapshot."""
    parity = sum(np.indices(grid.shape))
    return [
        CellField(grid, ((parity + n) % 2).astype(float), kind="density")
        for n in range(count)
    ]


class StudyRunner:
    """
    Runs the named studies on one base configuration.

    Independent simulations of a study run in a thread pool when more than
    one worker is configured; every run owns its own Simulator.
    """

    def __init__(
        self,
        config: SimConfig,
        out_dir: str | Path | None = None,
        workers: int | None = None,
    ):
        self.config = config
        self.config_hash = config_hash(config)
        self.out_dir = Path(out_dir) if out_dir is not None else None
        self.workers = workers or config.experiment.workers or 1
        numerics = config.numerics
        self.solver = EllipticSolver(numerics.elliptic_tol)
        self.scheme = FiniteVolumeScheme(numerics.flux)
        self.diagnostics = Diagnostics(self.scheme, self.solver, numerics.face_state)
        self.kinetic = KineticToolkit(self.scheme.law)
        self.xi = XiGrid(bins=numerics.xi_bins)
        self._studies: dict[str, Callable[[], StudyReport]] = {
            "vanishing-viscosity": self.vanishing_viscosity_study,
            "rigidity": self.rigidity_study,
            "long-time": self.long_time_study,
            "metastability": self.metastability_study,
            "entropy": self.entropy_refinement_study,
            "kinetic-consistency": self.kinetic_consistency_study,
            "elliptic-order": self.elliptic_order_study,
        }

    def run(self, name: str) -> StudyReport:
        """Run a study by its CLI name."""
        if name not in self._studies:
            raise ConfigurationError(
                "experiment.name",
                f"{ERROR_MESSAGES['UNKNOWN_STUDY']}: {name}. Valid studies are: {', '.join(STUDY_NAMES)}",
            )
        logger.info("Study %s started (config %s)", name, self.config_hash[:12])
        report = self._studies[name]()
        if report.passed:
            logger.info("Study %s passed all %d gates", name, len(report.gates))
        else:
            logger.warning("Study %s failed gates: %s", name, ", ".join(report.failed_gates))
        return report

    # Plumbing

    def _simulate_all(self, configs: Sequence[SimConfig]) -> list[Trajectory]:
        def simulate(config: SimConfig) -> Trajectory:
            return Simulator(config).advance()

        if self.workers > 1 and len(configs) > 1:
            with ThreadPoolExecutor(max_workers=self.workers) as pool:
                return list(pool.map(simulate, configs))
        return [simulate(c) for c in configs]

    def _report(self, name: str) -> StudyReport:
        return StudyReport(name=name, config_hash=self.config_hash)

    def _emit(
        self, report: StudyReport, runs: Mapping[str, Trajectory] | None = None
    ) -> None:
        """Write the study table and one timeseries per run (own subdirectory each)."""
        if self.out_dir is None:
            return
        base = self.out_dir / report.name
        table = write_table(report.table, base / "table.csv")
        report.artifacts.append(str(table))
        every = self.config.output.diagnostics_every
        for label, trajectory in (runs or {}).items():
            path = write_timeseries(trajectory.records, base / label / "timeseries.csv", every)
            report.artifacts.append(str(path))

    @staticmethod
    def _mass_conserved(trajectory: Trajectory) -> bool:
        records = trajectory.records
        volume = trajectory.final.u.grid.volume
        return abs(records[-1].mass - records[0].mass) <= MASS_TOLERANCE * volume

    @staticmethod
    def _max_bound_violation(trajectory: Trajectory) -> float:
        return max((r.bound_violation for r in trajectory.step_reports), default=0.0)

    # Vanishing viscosity

    def vanishing_viscosity_study(self, ladder: Sequence[float] | None = None) -> StudyReport:
        """
        Cauchy distances d_k = ||u_k(T) - u_k+1(T)||_L1 along a decreasing
        viscosity ladder, with the time-integrated defect mass per rung.

        Gates: d nonincreasing within 10% slack, defect bounded by twice the
        first rung, mass conservation and the maximum principle on every run.
        """
        report = self._report("vanishing-viscosity")
        epsilons = list(ladder if ladder is not None else self.config.experiment.epsilon_ladder)
        if len(epsilons) < 2:
            raise ConfigurationError("experiment.epsilon_ladder", "needs at least two rungs")
        runs = self._simulate_all([self.config.with_changes(epsilon=e) for e in epsilons])

        distances = [
            l1_distance(a.final.u, b.final.u) for a, b in zip(runs, runs[1:], strict=False)
        ]
        defects = [run.time_integrated_defect for run in runs]
        for i, (eps, run) in enumerate(zip(epsilons, runs, strict=True)):
            row: Row = {
                "epsilon": eps,
                "steps": run.steps,
                "defect": defects[i],
                "mass_drift": abs(run.records[-1].mass - run.records[0].mass),
            }
            if i < len(distances):
                row["cauchy_distance"] = distances[i]
            if 0 < i < len(distances) and distances[i] > ZERO_FLOOR:
                row["ratio"] = distances[i - 1] / distances[i]
            report.table.append(row)

        report.gates["cauchy_nonincreasing"] = all(
            nxt <= (1.0 + LADDER_SLACK) * cur + ZERO_FLOOR
            for cur, nxt in zip(distances, distances[1:], strict=False)
        )
        report.gates["defect_bounded"] = max(defects) <= DEFECT_GROWTH_FACTOR * defects[0] + ZERO_FLOOR
        report.gates["mass_conserved"] = all(self._mass_conserved(r) for r in runs)
        report.gates["max_principle"] = all(
            self._max_bound_violation(r) <= BOUND_SLACK for r in runs
        )
        logger.info("Cauchy distances along the ladder: %s", [f"{d:.3e}" for d in distances])

        refined = self._dx_refinement(epsilons[0], report)
        labelled = {f"eps_{e:g}": r for e, r in zip(epsilons, runs, strict=True)}
        labelled.update(refined)
        self._emit(report, labelled)
        return report

    def _dx_refinement(self, epsilon: float, report: StudyReport) -> dict[str, Trajectory]:
        """
        Fixed viscosity, cells doubled per level. e_l = ||u_l - P u_l+1||_L1
        with P the coarse average; gate: e_l / e_l+1 >= 1.5 (first order or better).
        """
        base = list(self.config.grid.cells)
        levels = self.config.experiment.refinements
        cells = [[n * 2**level for n in base] for level in range(levels)]
        runs = self._simulate_all(
            [self.config.with_changes(epsilon=epsilon, cells=c) for c in cells]
        )
        errors = [
            l1_distance(coarse.final.u, coarsen(fine.final.u, 2))
            for coarse, fine in zip(runs, runs[1:], strict=False)
        ]
        for i, error in enumerate(errors):
            row: Row = {"epsilon": epsilon, "cells": cells[i][0], "dx_error": error}
            if i + 1 < len(errors) and errors[i + 1] > ZERO_FLOOR:
                row["dx_ratio"] = error / errors[i + 1]
            report.table.append(row)
        low, _ = REFINEMENT_RATIO_RANGE
        report.gates["dx_first_order"] = all(
            fine <= ZERO_FLOOR or coarse >= low * fine
            for coarse, fine in zip(errors, errors[1:], strict=False)
        )
        logger.info("Grid refinement errors at eps=%g: %s", epsilon, [f"{e:.3e}" for e in errors])
        return {f"dx_{c[0]}": r for c, r in zip(cells, runs, strict=True)}

    # Rigidity

    def rigidity_analysis(
        self,
        snapshot_sets: Mapping[float, Sequence[CellField]],
        box_cells: Sequence[int],
        box_steps: Sequence[int],
    ) -> tuple[list[Row], dict[str, bool]]:
        """
        Rigidity defect R(eps, box) of the box-averaged kinetic lifts.

        Each lifted cell value already carries f - f^2 in the bin that
        straddles u. That cellwise floor, the defect of 1-cell, 1-snapshot
        boxes, does not depend on the box, so the gates compare the net
        defect R - floor: the box variance of the lifts, zero for single
        cells. The net defect is averaged over every box offset so an
        interface lying on a box boundary counts like any other; a step
        then contributes (b^2 - 1) / (6 b) cells of defect per unit jump.

        Args:
            snapshot_sets: Snapshot sequence per viscosity
            box_cells: Box widths, coarse to fine
            box_steps: Box lengths in snapshots, paired with box_cells

        Returns:
            Table rows and the gates: net R nonincreasing as eps decreases,
            net R shrinking with the box at the smallest eps, and the
            f (1 - f) bound on every averaged field
        """
        epsilons = sorted(snapshot_sets, reverse=True)
        boxes = list(zip(box_cells, box_steps, strict=True))
        net: dict[tuple[float, int], float] = {}
        worst_lemma = 0.0
        rows: list[Row] = []
        for eps in epsilons:
            snapshots = snapshot_sets[eps]
            volume = snapshots[0].grid.volume
            for index, (cells, steps) in enumerate(boxes):
                offsets = range(cells)
                raw = 0.0
                lemma = 0.0
                shares = []
                for offset in offsets:
                    shifted = shift_to_boxes(snapshots, offset)
                    floor = self.kinetic.rigidity_defect(
                        self.kinetic.box_average(shifted, 1, 1, self.xi)
                    )
                    averaged = self.kinetic.box_average(shifted, cells, steps, self.xi)
                    defect = self.kinetic.rigidity_defect(averaged)
                    lemma = max(lemma, self.kinetic.rho_bound_check(averaged))
                    if offset == 0:
                        raw = defect
                    shares.append((defect - floor) * volume / shifted[0].grid.volume)
                worst_lemma = max(worst_lemma, lemma)
                net[(eps, index)] = max(float(np.mean(shares)), 0.0)
                rows.append(
                    {
                        "epsilon": eps,
                        "box_cells": cells,
                        "box_steps": steps,
                        "rigidity_defect": raw,
                        "net_defect": net[(eps, index)],
                        "lemma_violation": lemma,
                    }
                )

        in_epsilon = all(
            net[(small, i)] <= (1.0 + LADDER_SLACK) * net[(big, i)] + ZERO_FLOOR
            for i in range(len(boxes))
            for big, small in zip(epsilons, epsilons[1:], strict=False)
        )
        smallest = epsilons[-1]
        in_box = all(
            net[(smallest, i)] <= ZERO_FLOOR
            or net[(smallest, i)] >= RIGIDITY_REFINEMENT_RATIO * net[(smallest, i + 1)]
            for i in range(len(boxes) - 1)
        )
        gates = {
            "defect_nonincreasing_in_epsilon": in_epsilon,
            "defect_shrinks_with_box": in_box,
            "lemma_bound": worst_lemma <= LEMMA_TOLERANCE,
        }
        return rows, gates

    def checkerboard_control(self, grid: Grid, box_cells: Sequence[int]) -> float:
        """
        Rigidity defect of the flipping checkerboard; every even box sees
        f = 1/2 so R = |domain| / 4 regardless of the box.
        """
        even = [b for b in box_cells if b % 2 == 0 and all(n % b == 0 for n in grid.cells)] or [2]
        values = [
            self.kinetic.rigidity_defect(
                self.kinetic.box_average(checkerboard_snapshots(grid, 2), b, 1, self.xi)
            )
            for b in even
        ]
        return min(values)

    def rigidity_study(self) -> StudyReport:
        """Rigidity defect on the viscosity ladder plus the checkerboard control."""
        report = self._report("rigidity")
        experiment = self.config.experiment
        final_time = self.config.physics.final_time
        configs = [
            self.config.with_changes(
                epsilon=e, snapshot_interval=final_time / RIGIDITY_SNAPSHOTS
            )
            for e in experiment.epsilon_ladder
        ]
        runs = self._simulate_all(configs)
        window = math.lcm(*experiment.box_steps)
        snapshot_sets: dict[float, list[CellField]] = {}
        for eps, run in zip(experiment.epsilon_ladder, runs, strict=True):
            states = [s.u for s in run.snapshots[1:]]
            keep = (len(states) // window) * window
            if keep == 0:
                raise ConfigurationError(
                    "experiment.box_steps", f"{len(states)} snapshots cannot fill a box of {window}"
                )
            snapshot_sets[eps] = states[len(states) - keep :]

        rows, gates = self.rigidity_analysis(snapshot_sets, experiment.box_cells, experiment.box_steps)
        report.table.extend(rows)
        report.gates.update(gates)

        grid = runs[0].final.u.grid
        control = self.checkerboard_control(grid, experiment.box_cells)
        expected = 0.25 * grid.volume
        report.table.append({"epsilon": "checkerboard", "rigidity_defect": control})
        report.gates["checkerboard_control"] = abs(control - expected) <= 1e-12 * max(1.0, grid.volume)
        self._emit(report, {f"eps_{e:g}": r for e, r in zip(experiment.epsilon_ladder, runs, strict=True)})
        return report

    # Long time

    def long_time_study(self) -> StudyReport:
        """
        Hyperbolic run (eps = 0) to the final time, then gates on the
        terminal state: dissipation, plateau structure, mass, monotone
        energy, support residual and stationary interfaces.
        """
        report = self._report("long-time")
        run = self._simulate_all([self.config.with_changes(epsilon=0.0)])[0]
        final = run.final
        grid = final.u.grid

        for snap in run.snapshots:
            energy, norm = self.diagnostics.energy_and_norm(snap.u, snap.S)
            report.table.append(
                {
                    "t": snap.t,
                    "energy": energy,
                    "h1_norm_squared": norm,
                    "dissipation": self.diagnostics.dissipation_rate(snap.u, snap.S),
                    "intermediate_fraction": self.diagnostics.intermediate_fraction(snap.u),
                    "plateaus": self.diagnostics.count_plateaus(snap.u),
                }
            )

        steady = self.diagnostics.steady_state_residuals(final.u, final.S)
        energy = self.diagnostics.energy_identity_check(run.records, grid, 0.0)
        # stationarity is judged on the upwind face state
        terminal = self.diagnostics.dissipation_rate(final.u, final.S, "godunov")
        report.notes.append(f"terminal dissipation (Godunov face state) {terminal:.3e}")
        report.gates["dissipation"] = terminal <= STEADY_DISSIPATION_TOL
        # a constant state is steady without plateaus
        spread = float(final.u.values.max() - final.u.values.min())
        report.gates["plateau_structure"] = (
            self.diagnostics.intermediate_fraction(final.u) <= INTERMEDIATE_FRACTION_GATE
            or spread <= BOUND_SLACK
        )
        report.gates["mass_conserved"] = self._mass_conserved(run)
        report.gates["energy_monotone"] = energy.monotone
        report.gates["cumulative_dissipation"] = energy.within_bound
        report.gates["support_residual"] = steady.support <= STEADY_SUPPORT_TOL
        report.gates["interfaces_stationary"] = steady.max_face_flux <= STEADY_FLUX_TOL
        report.notes.append(f"plateaus at T: {self.diagnostics.count_plateaus(final.u)}")
        report.notes.append(
            f"cumulative dissipation {energy.cumulative_dissipation:.6g} "
            f"(bound {energy.cumulative_bound:.6g})"
        )
        self._emit(report, {"eps_0": run})
        return report

    # Metastability

    @staticmethod
    def formation_time(trajectory: Trajectory) -> float | None:
        """
        First time after the peak at which the energy rate D + viscous rate
        falls below 1% of the peak dissipation.
        """
        records = trajectory.records
        peak_index = int(np.argmax([r.dissipation for r in records]))
        peak = records[peak_index].dissipation
        if peak <= 0.0:
            return 0.0
        for record in records[peak_index:]:
            if abs(record.dissipation + record.viscous_rate) < FORMATION_DISSIPATION_FRACTION * peak:
                return record.t
        return None

    @staticmethod
    def dwell_time(trajectory: Trajectory, start: float) -> tuple[float, bool]:
        """
        Time the snapshots stay within L1 distance 0.05 of the first
        snapshot at or after `start`; the flag is False when the run ended
        before the profile was left.
        """
        snaps = [s for s in trajectory.snapshots if s.t >= start]
        if not snaps:
            return 0.0, False
        frozen = snaps[0]
        last = frozen.t
        for snap in snaps[1:]:
            if l1_distance(snap.u, frozen.u) > DWELL_DISTANCE:
                return last - frozen.t, True
            last = snap.t
        return last - frozen.t, False

    def metastability_study(self) -> StudyReport:
        """
        Regime A (eps > 1/4) decays to the mean; regime B (small eps) forms
        plateaus and dwells near them; the eps = 0 control keeps its plateaus.

        Regime B runs to experiment.regime_final_time when set. Otherwise it
        starts with the base final time and, once plateaus have formed, is
        continued until (1 + dwell ratio) times the formation time so the
        dwell gate can be decided. Regime B and the control record the
        dissipation at the Godunov face state.
        """
        report = self._report("metastability")
        experiment = self.config.experiment
        dim = len(self.config.grid.cells)
        interval = self.config.snapshot_interval
        regime_config = self.config.with_changes(
            epsilon=experiment.regime_epsilon,
            final_time=experiment.regime_final_time,
            snapshot_interval=interval,
            face_state="godunov",
        )
        configs = [
            self.config.with_changes(
                epsilon=experiment.constant_epsilon, cells=[experiment.constant_cells] * dim
            ),
            regime_config,
            self.config.with_changes(epsilon=0.0, face_state="godunov"),
        ]
        constant, regime, control = self._simulate_all(configs)

        u_final = constant.final.u
        mean = field_integral(u_final) / u_final.grid.volume
        deviation = float(np.abs(u_final.values - mean).max())
        report.table.append(
            {"regime": "constant", "epsilon": experiment.constant_epsilon, "deviation": deviation}
        )
        report.gates["constant_state"] = deviation <= CONSTANT_STATE_TOL

        formation = self.formation_time(regime)
        if formation is not None and experiment.regime_final_time is None:
            horizon = (DWELL_RATIO_GATE + 1.0) * formation + 2.0 * interval
            if horizon > regime.final.t:
                logger.info(
                    "Plateaus formed at t=%.4g; continuing regime B to t=%.4g", formation, horizon
                )
                extra = regime_config.with_changes(final_time=horizon - regime.final.t)
                regime.extend(Simulator(extra).advance(regime.final.u))

        for snap in regime.snapshots:
            report.table.append(
                {
                    "regime": "metastable",
                    "epsilon": experiment.regime_epsilon,
                    "t": snap.t,
                    "plateaus": self.diagnostics.count_plateaus(snap.u),
                }
            )
        if formation is None:
            report.notes.append("plateaus did not form before the final time")
            report.gates["dwell_ratio"] = False
        else:
            dwell, left = self.dwell_time(regime, formation)
            if not left:
                report.notes.append("dwell time truncated by the run length")
            report.table.append(
                {
                    "regime": "metastable",
                    "epsilon": experiment.regime_epsilon,
                    "formation_time": formation,
                    "dwell_time": dwell,
                }
            )
            report.gates["dwell_ratio"] = dwell >= DWELL_RATIO_GATE * formation

        control_final = control.final
        fraction = self.diagnostics.intermediate_fraction(control_final.u)
        report.table.append(
            {
                "regime": "control",
                "epsilon": 0.0,
                "intermediate_fraction": fraction,
                "dissipation": control.records[-1].dissipation,
                "plateaus": self.diagnostics.count_plateaus(control_final.u),
            }
        )
        report.gates["control_plateaus"] = (
            fraction <= INTERMEDIATE_FRACTION_GATE
            and control.records[-1].dissipation <= STEADY_DISSIPATION_TOL
        )
        self._emit(report, {"constant": constant, "metastable": regime, "control": control})
        return report

    # Entropy refinement

    def entropy_refinement_study(self) -> StudyReport:
        """
        Kruzkov residuals on the base grid and on the grid refined twice in
        every axis: cellwise gate 5 (dx + dt), decrease under refinement,
        round-off only for the levels 0 and 1.
        """
        report = self._report("entropy")
        levels = sorted({*self.config.numerics.kruzkov_levels, 0.0, 1.0})
        cells = list(self.config.grid.cells)
        configs = [
            self.config.with_changes(kruzkov_levels=levels),
            self.config.with_changes(kruzkov_levels=levels, cells=[2 * n for n in cells]),
        ]
        runs = self._simulate_all(configs)

        interior_worst: list[float] = []
        cellwise = True
        extremes = 0.0
        for label, run in zip(("coarse", "fine"), runs, strict=True):
            h = run.final.u.grid.min_spacing
            worst = 0.0
            for record in run.records[:-1]:
                inner = [v for k, v in record.entropy_residuals.items() if k not in ("0", "1")]
                peak = max(inner, default=0.0)
                worst = max(worst, peak)
                if peak > ENTROPY_GATE_FACTOR * (h + record.dt):
                    cellwise = False
                extremes = max(
                    extremes,
                    record.entropy_residuals.get("0", 0.0),
                    record.entropy_residuals.get("1", 0.0),
                )
            interior_worst.append(worst)
            report.table.append(
                {"grid": label, "dx": h, "max_residual": worst, "steps": run.steps}
            )

        coarse, fine = interior_worst
        report.gates["cellwise_bound"] = cellwise
        report.gates["refinement_decrease"] = fine <= ENTROPY_NOISE_FLOOR or fine <= 0.75 * coarse
        report.gates["extreme_levels"] = extremes <= LEMMA_TOLERANCE
        if coarse > ENTROPY_NOISE_FLOOR and fine > ENTROPY_NOISE_FLOOR:
            report.notes.append(f"refinement ratio {coarse / fine:.3f}")
        self._emit(report, {"coarse": runs[0], "fine": runs[1]})
        return report

    # Kinetic consistency

    def kinetic_consistency_study(self) -> StudyReport:
        """
        L1 distance between the kinetic and finite-volume backends, on the
        base resolution and with (dx, dxi, dt) halved.
        """
        report = self._report("kinetic-consistency")
        cells = list(self.config.grid.cells)
        bins = self.config.numerics.xi_bins
        resolutions = [(cells, bins), ([2 * n for n in cells], 2 * bins)]
        configs = []
        for res_cells, res_bins in resolutions:
            configs.append(self.config.with_changes(cells=res_cells, backend="finite-volume"))
            configs.append(
                self.config.with_changes(cells=res_cells, backend="kinetic", xi_bins=res_bins)
            )
        runs = self._simulate_all(configs)

        distances = []
        for index, (res_cells, res_bins) in enumerate(resolutions):
            fv, kin = runs[2 * index], runs[2 * index + 1]
            distance = l1_distance(fv.final.u, kin.final.u)
            distances.append(distance)
            report.table.append(
                {"cells": res_cells[0], "xi_bins": res_bins, "l1_distance": distance}
            )

        ratio = distances[0] / distances[1] if distances[1] > ZERO_FLOOR else math.inf
        report.table.append({"ratio": ratio})
        low, high = REFINEMENT_RATIO_RANGE
        report.gates["refinement_ratio"] = low <= ratio <= high
        report.gates["defect_nonnegative"] = all(
            r.defect_mass >= 0.0 for run in runs[1::2] for r in run.records
        )
        self._emit(
            report,
            {
                "fv_coarse": runs[0],
                "kinetic_coarse": runs[1],
                "fv_fine": runs[2],
                "kinetic_fine": runs[3],
            },
        )
        return report

    # Elliptic order

    def elliptic_order_study(self) -> StudyReport:
        """
        Manufactured cosine on a torus: (I - Laplacian) S = u has the exact
        solution S = mean + amp cos / (1 + |k|^2); the error at cell centres
        must converge at second order.
        """
        report = self._report("elliptic-order")
        lengths = tuple(self.config.grid.lengths)
        base = tuple(self.config.grid.cells)
        mean, amp = 0.5, 0.4
        errors: list[float] = []
        conserved = True
        bounded = True
        for level in range(self.config.experiment.refinements):
            grid = build_grid(lengths, tuple(n * 2**level for n in base), "periodic")
            wave = np.ones(grid.shape)
            k2 = 0.0
            for axis, x in enumerate(grid.mesh()):
                k = 2.0 * math.pi / lengths[axis]
                wave = wave * np.cos(k * x)
                k2 += k * k
            u = CellField(grid, mean + amp * wave, kind="density")
            exact = mean + amp * wave / (1.0 + k2)
            S, solve = self.solver.solve_potential(u)
            error = float(np.abs(S.values - exact).max())
            errors.append(error)
            conserved = conserved and abs(field_integral(S) - field_integral(u)) <= 1e-12 * max(
                1.0, grid.volume
            )
            bounded = bounded and float(u.values.min()) <= solve.s_min and solve.s_max <= float(
                u.values.max()
            )
            report.table.append(
                {
                    "cells": grid.cells[0],
                    "error": error,
                    "residual": solve.residual,
                    "method": solve.method,
                }
            )

        orders = [
            math.log2(coarse / fine) for coarse, fine in zip(errors, errors[1:], strict=False)
        ]
        for row, order in zip(report.table[1:], orders, strict=True):
            row["order"] = order
        low, high = ELLIPTIC_ORDER_RANGE
        report.gates["second_order"] = all(low <= p <= high for p in orders)
        report.gates["mass_identity"] = conserved
        report.gates["max_principle"] = bounded
        self._emit(report)
        return report


def run_study(
    name: str,
    config: SimConfig,
    out_dir: str | Path | None = None,
    workers: int | None = None,
) -> StudyReport:
    """Run one study on a configuration."""
    return StudyRunner(config, out_dir, workers).run(name)
