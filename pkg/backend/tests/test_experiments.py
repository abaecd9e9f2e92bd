"""
Tests for the study runner and its gates.
"""

import numpy as np
import pytest

from app.exceptions import ConfigurationError
from app.models.fields import CellField
from app.models.grid import build_grid
from app.models.reports import DiagnosticsRecord, Snapshot, Trajectory
from app.models.sim_config import SimConfig
from app.services.experiments import (
    StudyRunner,
    checkerboard_snapshots,
    coarsen,
    l1_distance,
    run_study,
    shift_to_boxes,
)


def make_config(
    cells: int = 40,
    final_time: float = 0.2,
    preset: str = "cosine-perturbation",
    params: dict | None = None,
    experiment: dict | None = None,
    numerics: dict | None = None,
) -> SimConfig:
    """Small 1D configuration for study tests."""
    return SimConfig.model_validate(
        {
            "grid": {"lengths": [1.0], "cells": [cells]},
            "physics": {
                "final_time": final_time,
                "initial": {"preset": preset, "params": params or {}},
            },
            "numerics": numerics or {},
            "experiment": experiment or {},
        }
    )


def synthetic_trajectory(dissipations, states) -> Trajectory:
    """Trajectory with one record per dissipation value and one snapshot per state."""
    grid = build_grid((1.0,), (10,))
    trajectory = Trajectory()
    for i, d in enumerate(dissipations):
        trajectory.records.append(
            DiagnosticsRecord(t=float(i), dt=1.0, mass=0.5, energy=0.0, dissipation=d)
        )
    for i, value in enumerate(states):
        u = CellField(grid, np.full(10, value), kind="density")
        trajectory.snapshots.append(Snapshot(float(i), u, u.with_values(u.values, "potential")))
    return trajectory


class TestHelpers:
    """Test module-level helpers."""

    def test_l1_distance(self):
        """Test volume-weighted L1 distance."""
        grid = build_grid((2.0,), (4,))
        a = CellField(grid, np.zeros(4), kind="density")
        b = CellField(grid, np.array([1.0, 0.0, 0.5, 0.0]), kind="density")
        assert l1_distance(a, b) == pytest.approx(0.75)

    def test_checkerboard_flips(self):
        """Test the checkerboard alternates in space and time."""
        grid = build_grid((1.0, 1.0), (4, 4))
        first, second = checkerboard_snapshots(grid, 2)
        assert first.values[0, 0] == 0.0 and first.values[0, 1] == 1.0
        assert np.array_equal(first.values + second.values, np.ones((4, 4)))

    def test_coarsen(self):
        """Test block means keep the mass and halve the cells."""
        grid = build_grid((1.0, 2.0), (8, 4), "periodic")
        u = CellField(grid, np.arange(32.0).reshape(8, 4), kind="density")
        coarse = coarsen(u, 2)
        assert coarse.grid.cells == (4, 2)
        assert coarse.grid.is_periodic
        assert coarse.values[0, 0] == pytest.approx(2.5)
        assert coarse.values[3, 1] == pytest.approx(28.5)
        assert coarse.values.sum() * coarse.grid.cell_volume == pytest.approx(
            u.values.sum() * grid.cell_volume
        )

    def test_shift_rolls_a_torus(self):
        """Test periodic snapshots are rolled by the offset."""
        grid = build_grid((1.0,), (4,), "periodic")
        u = CellField(grid, np.array([0.0, 0.1, 0.2, 0.3]), kind="density")
        (shifted,) = shift_to_boxes([u], 1)
        assert shifted.grid is grid
        assert np.allclose(shifted.values, [0.1, 0.2, 0.3, 0.0])
        assert shift_to_boxes([u], 0)[0] is u

    def test_shift_mirrors_walls(self):
        """Test walled snapshots are mirrored onto a doubled torus before rolling."""
        grid = build_grid((1.0,), (4,))
        u = CellField(grid, np.array([0.0, 0.1, 0.2, 0.3]), kind="density")
        (shifted,) = shift_to_boxes([u], 1)
        assert shifted.grid.cells == (8,)
        assert shifted.grid.lengths == (2.0,)
        assert shifted.grid.is_periodic
        assert np.allclose(shifted.values, [0.1, 0.2, 0.3, 0.3, 0.2, 0.1, 0.0, 0.0])


class TestStudyRunner:
    """Test dispatch and file output."""

    def test_unknown_study(self):
        """Test unknown study names raise ConfigurationError."""
        runner = StudyRunner(make_config())
        with pytest.raises(ConfigurationError) as exc:
            runner.run("sweep")
        assert exc.value.key == "experiment.name"

    def test_report_carries_config_hash(self):
        """Test the report names the study and the configuration hash."""
        config = make_config(cells=32, experiment={"refinements": 3})
        runner = StudyRunner(config)
        report = runner.run("elliptic-order")
        assert report.name == "elliptic-order"
        assert report.config_hash == runner.config_hash
        assert len(report.config_hash) == 64

    def test_tables_and_timeseries_are_written(self, tmp_path):
        """Test studies write their table and per-run timeseries."""
        config = make_config(cells=20, final_time=0.1, preset="constant", params={"value": 0.5})
        report = run_study("long-time", config, tmp_path)
        assert (tmp_path / "long-time" / "table.csv").exists()
        assert (tmp_path / "long-time" / "eps_0" / "timeseries.csv").exists()
        assert len(report.artifacts) == 2


class TestEllipticOrderStudy:
    """Test the manufactured-solution study."""

    def test_second_order(self):
        """Test observed orders near 2 with mass and bounds preserved."""
        report = StudyRunner(make_config(cells=32, experiment={"refinements": 3})).run(
            "elliptic-order"
        )
        assert report.passed, report.gates
        assert [row["cells"] for row in report.table] == [32, 64, 128]
        assert 1.8 <= report.table[1]["order"] <= 2.2


class TestRigidity:
    """Test the rigidity analysis on prepared snapshots."""

    def setup_method(self):
        """Set up test fixtures."""
        self.runner = StudyRunner(make_config(cells=16))
        self.grid = build_grid((1.0,), (16,))

    def test_constant_snapshots_pass(self):
        """Test indicator snapshots give zero defect and pass every gate."""
        states = [CellField(self.grid, np.full(16, 0.5), kind="density")] * 4
        rows, gates = self.runner.rigidity_analysis({0.01: states, 0.005: states}, [4, 2], [2, 1])
        assert all(gates.values()), gates
        assert len(rows) == 4
        assert all(row["rigidity_defect"] == 0.0 for row in rows)

    def test_oscillating_snapshots_fail_the_epsilon_gate(self):
        """Test a defect that grows as eps shrinks is flagged."""
        flat = [CellField(self.grid, np.full(16, 0.5), kind="density")] * 2
        flipping = checkerboard_snapshots(self.grid, 2)
        _, gates = self.runner.rigidity_analysis({0.01: flat, 0.005: flipping}, [4], [2])
        assert not gates["defect_nonincreasing_in_epsilon"]
        assert gates["lemma_bound"]

    def test_checkerboard_control(self):
        """Test the checkerboard control equals |domain| / 4."""
        value = self.runner.checkerboard_control(self.grid, [4, 2])
        assert value == pytest.approx(0.25, abs=1e-12)

    def test_step_defect_matches_box_formula(self):
        """Test a 0 | 1 step gives (b^2 - 1) / (6 b) cells of net defect for every box."""
        runner = StudyRunner(make_config(cells=64))
        grid = build_grid((1.0,), (64,))
        values = np.zeros(64)
        values[30:] = 1.0
        states = [CellField(grid, values, kind="density")] * 4
        rows, gates = runner.rigidity_analysis({0.01: states}, [8, 4, 2], [1, 1, 1])
        for row in rows:
            b = row["box_cells"]
            assert row["net_defect"] == pytest.approx((b * b - 1) / (6 * b) / 64, rel=1e-9)
        assert all(gates.values()), gates

    def test_riemann_ladder_passes(self):
        """Test the full study on a stationary shock passes every gate."""
        config = make_config(
            cells=80,
            final_time=0.5,
            preset="riemann",
            params={"left": 0.0, "right": 1.0},
            experiment={
                "epsilon_ladder": [0.02, 0.01, 0.005],
                "box_cells": [8, 4, 2],
                "box_steps": [4, 2, 1],
            },
        )
        report = StudyRunner(config).run("rigidity")
        assert report.passed, report.failed_gates
        nets = [row["net_defect"] for row in report.table if row["epsilon"] == 0.005]
        assert nets[0] > nets[1] > nets[2] > 0.0


class TestLongTime:
    """Test the long-time study on exact steady states."""

    def test_riemann_plateau(self):
        """Test a 0 -> 1 step passes every terminal gate."""
        config = make_config(
            cells=40, final_time=1.0, preset="riemann", params={"left": 0.0, "right": 1.0}
        )
        report = StudyRunner(config).run("long-time")
        assert report.passed, report.failed_gates
        assert set(report.gates) == {
            "dissipation",
            "plateau_structure",
            "mass_conserved",
            "energy_monotone",
            "cumulative_dissipation",
            "support_residual",
            "interfaces_stationary",
        }
        assert report.table[-1]["plateaus"] == 1

    def test_constant_state(self):
        """Test a constant state is accepted without plateaus."""
        config = make_config(cells=20, final_time=0.5, preset="constant", params={"value": 0.5})
        report = StudyRunner(config).run("long-time")
        assert report.passed, report.failed_gates

    def test_cosine_settles_into_plateaus(self):
        """Test a cosine perturbation aggregates and stops moving by T = 200."""
        config = make_config(
            cells=400,
            final_time=200.0,
            params={"mean": 0.5, "amp": 0.3, "mode": 1},
        )
        report = StudyRunner(config).run("long-time")
        assert report.passed, report.failed_gates
        last = report.table[-1]
        assert last["plateaus"] >= 1
        assert last["energy"] == pytest.approx(last["h1_norm_squared"], abs=400**-2)


class TestMetastability:
    """Test the metastability study and its time measurements."""

    def test_formation_time(self):
        """Test formation is the first time after the peak with D below 1% of it."""
        trajectory = synthetic_trajectory([0.1, 1.0, 0.5, 0.005, 0.001], [0.5])
        assert StudyRunner.formation_time(trajectory) == 3.0
        assert StudyRunner.formation_time(synthetic_trajectory([0.1, 1.0, 0.5], [0.5])) is None
        assert StudyRunner.formation_time(synthetic_trajectory([0.0, 0.0], [0.5])) == 0.0

    def test_dwell_time(self):
        """Test dwell is measured from the first snapshot at or after the start."""
        trajectory = synthetic_trajectory([0.0], [0.5, 0.5, 0.5, 0.5, 1.0, 1.0])
        assert StudyRunner.dwell_time(trajectory, 1.0) == (2.0, True)
        assert StudyRunner.dwell_time(trajectory, 0.5) == (2.0, True)
        assert StudyRunner.dwell_time(trajectory, 4.0) == (1.0, False)
        assert StudyRunner.dwell_time(trajectory, 10.0) == (0.0, False)

    def test_strong_viscosity_reaches_the_mean(self):
        """Test eps above 1/4 flattens the cosine within the run."""
        report = StudyRunner(make_config(cells=40, final_time=0.5)).run("metastability")
        assert report.gates["constant_state"]
        assert set(report.gates) == {"constant_state", "dwell_ratio", "control_plateaus"}
        assert report.table[0]["regime"] == "constant"

    def test_small_viscosity_dwells_near_its_plateaus(self):
        """Test regime B is run long enough to decide the dwell gate, and passes it."""
        config = make_config(cells=40, final_time=20.0, experiment={"constant_cells": 16})
        report = StudyRunner(config).run("metastability")
        assert report.gates["constant_state"]
        assert report.gates["dwell_ratio"], report.notes
        (timing,) = [row for row in report.table if "formation_time" in row]
        assert timing["dwell_time"] >= 10.0 * timing["formation_time"]
        times = [row["t"] for row in report.table if row.get("regime") == "metastable" and "t" in row]
        assert times == sorted(times)
        assert times[-1] >= 11.0 * timing["formation_time"]

    def test_fixed_regime_horizon(self):
        """Test regime_final_time pins the regime B run length."""
        config = make_config(
            cells=40, final_time=0.5, experiment={"regime_final_time": 1.0, "constant_cells": 16}
        )
        report = StudyRunner(config).run("metastability")
        times = [row["t"] for row in report.table if row.get("regime") == "metastable" and "t" in row]
        assert times[-1] == pytest.approx(1.0)


class TestEntropyStudy:
    """Test the entropy refinement study."""

    def test_smooth_run_passes(self):
        """Test residuals stay at round-off on both grids."""
        report = StudyRunner(make_config(cells=40, final_time=0.2)).run("entropy")
        assert report.passed, report.failed_gates
        assert [row["grid"] for row in report.table] == ["coarse", "fine"]


class TestKineticConsistency:
    """Test the backend comparison study."""

    def test_runs_both_backends(self):
        """Test both resolutions are compared and defects stay nonnegative."""
        config = make_config(cells=16, final_time=0.05, numerics={"xi_bins": 16})
        report = StudyRunner(config).run("kinetic-consistency")
        assert report.gates["defect_nonnegative"]
        assert set(report.gates) == {"refinement_ratio", "defect_nonnegative"}
        assert [row.get("cells") for row in report.table[:2]] == [16, 32]

    def test_refinement_ratio_on_a_shock(self):
        """Test halving (dx, dxi, dt) roughly halves the backend distance."""
        config = make_config(
            cells=32,
            final_time=0.5,
            preset="riemann",
            params={"left": 0.2, "right": 0.8},
            numerics={"xi_bins": 32},
        )
        report = StudyRunner(config).run("kinetic-consistency")
        assert report.gates["refinement_ratio"], report.table
        assert report.passed, report.failed_gates


class TestVanishingViscosity:
    """Test the viscosity ladder."""

    def test_ladder_on_smooth_data(self):
        """Test Cauchy distances shrink along a halving ladder."""
        config = make_config(cells=100, final_time=0.2)
        report = StudyRunner(config, workers=2).vanishing_viscosity_study([0.02, 0.01, 0.005])
        assert report.gates["cauchy_nonincreasing"]
        assert report.gates["mass_conserved"]
        assert report.gates["max_principle"]
        assert report.gates["defect_bounded"]
        assert report.table[0]["cauchy_distance"] > report.table[1]["cauchy_distance"]
        assert report.gates["dx_first_order"]
        dx_rows = [row for row in report.table if "dx_error" in row]
        assert [row["cells"] for row in dx_rows] == [100, 200]
        assert all(row["epsilon"] == 0.02 for row in dx_rows)
        assert dx_rows[0]["dx_error"] > dx_rows[1]["dx_error"]

    def test_ladder_needs_two_rungs(self):
        """Test a single rung is rejected."""
        with pytest.raises(ConfigurationError):
            StudyRunner(make_config()).vanishing_viscosity_study([0.01])
