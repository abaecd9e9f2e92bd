"""
Tests for the kinetic toolkit: lift, collapse, rho bound, rigidity and transport.
"""

import numpy as np
import pytest

from app.exceptions import BoxSizeError, CFLViolationError, GridError, MonotonicityError
from app.models.fields import CellField, FaceField
from app.models.grid import build_grid
from app.models.kinetic import DefectDensity, KineticField, XiGrid
from app.services.kinetic import KineticToolkit


class TestLiftAndCollapse:
    """Test lifting densities to indicators and projecting back."""

    def setup_method(self):
        """Set up test fixtures."""
        self.toolkit = KineticToolkit()
        self.grid = build_grid((1.0,), (4,))
        self.xi = XiGrid(bins=10)

    def test_lift_single_value(self):
        """Test the straddling bin holds the fractional part."""
        u = CellField(self.grid, np.full(4, 0.37), kind="density")
        f = self.toolkit.lift_indicator(u, self.xi)
        row = f.values[0, 0]
        assert np.all(row[:3] == 1.0)
        assert row[3] == pytest.approx(0.7)
        assert np.all(row[4:] == 0.0)
        assert self.toolkit.integrate(f)[0, 0] == pytest.approx(0.37)

    def test_lift_is_monotone_indicator(self):
        """Test lifts are nonincreasing in xi with one partial bin per cell."""
        rng = np.random.default_rng(0)
        u = CellField(self.grid, rng.uniform(size=4), kind="density")
        f = self.toolkit.lift_indicator(u, self.xi)
        assert f.is_monotone()
        assert self.toolkit.is_indicator(f)
        assert np.allclose(self.toolkit.integrate(f)[0], u.values)

    def test_collapse_of_half(self):
        """Test collapse of f = 1/2 gives u = 1/2 and a tent-shaped defect."""
        f = KineticField(self.grid, self.xi, np.full((1, 4, 10), 0.5))
        u, lifted, defect = self.toolkit.collapse_to_indicator(f)
        assert np.allclose(u.values, 0.5)
        assert np.allclose(lifted.values[0, :, :5], 1.0)
        assert np.allclose(lifted.values[0, :, 5:], 0.0)
        assert defect.values.max() == pytest.approx(0.25)
        assert defect.values.min() >= 0.0
        assert defect.total_mass == pytest.approx(0.125)

    def test_collapse_of_indicator_has_no_defect(self):
        """Test collapsing a lift is the identity."""
        u = CellField(self.grid, np.array([0.0, 0.25, 0.61, 1.0]), kind="density")
        f = self.toolkit.lift_indicator(u, self.xi)
        u_back, lifted, defect = self.toolkit.collapse_to_indicator(f)
        assert np.allclose(u_back.values, u.values)
        assert np.allclose(lifted.values, f.values)
        assert defect.total_mass == pytest.approx(0.0, abs=1e-15)

    def test_collapse_needs_single_slab(self):
        """Test multi-slab fields cannot be collapsed."""
        f = KineticField(self.grid, self.xi, np.zeros((2, 4, 10)))
        with pytest.raises(GridError):
            self.toolkit.collapse_to_indicator(f)

    def test_defect_addition(self):
        """Test defect densities add on a common grid only."""
        a = DefectDensity(self.grid, self.xi, np.ones((4, 10)))
        assert (a + a).total_mass == pytest.approx(2 * a.total_mass)
        other = DefectDensity(self.grid, XiGrid(bins=16), np.ones((4, 16)))
        with pytest.raises(GridError):
            a + other  # noqa: B018


class TestRhoBound:
    """Test the rho functional and the f (1 - f) bound."""

    def setup_method(self):
        """Set up test fixtures."""
        self.toolkit = KineticToolkit()
        self.grid = build_grid((1.0,), (4,))
        self.xi = XiGrid(bins=10)

    def test_rho_of_half_is_constant(self):
        """Test rho = 1/2 everywhere for f = 1/2."""
        f = KineticField(self.grid, self.xi, np.full((1, 4, 10), 0.5))
        assert np.allclose(self.toolkit.rho_values(f), 0.5)

    def test_rho_of_an_indicator(self):
        """Test rho of a lifted density is u below u and zero above."""
        u = CellField(self.grid, np.array([0.5, 0.5, 0.0, 0.0]), kind="density")
        rho = self.toolkit.rho_from_f(self.toolkit.lift_indicator(u, self.xi))
        assert isinstance(rho, KineticField)
        expected = np.zeros((1, 4, 10))
        expected[0, :2, :5] = 0.5
        assert np.allclose(rho.values, expected)

    def test_bound_is_sharp_for_half(self):
        """Test f = 1/2 attains the bound with C = 1."""
        f = KineticField(self.grid, self.xi, np.full((1, 4, 10), 0.5))
        assert self.toolkit.rho_bound_check(f, c_sup=1.0) <= 1e-12
        assert self.toolkit.support_edge(f) == pytest.approx(1.0)
        # a smaller constant breaks it
        assert self.toolkit.rho_bound_check(f, c_sup=0.5) > 0.1

    def test_bound_for_indicators(self):
        """Test lifted densities satisfy the bound."""
        u = CellField(self.grid, np.array([0.0, 0.3, 0.55, 1.0]), kind="density")
        f = self.toolkit.lift_indicator(u, self.xi)
        assert self.toolkit.rho_bound_check(f) <= 1e-12

    def test_increasing_field_is_rejected(self):
        """Test fields increasing in xi raise."""
        values = np.tile(np.linspace(0.0, 1.0, 10), (1, 4, 1))
        f = KineticField(self.grid, self.xi, values)
        with pytest.raises(MonotonicityError):
            self.toolkit.rho_bound_check(f)

    def test_box_averages_of_random_ensembles(self):
        """Test the bound on box averages of random lifted snapshots."""
        rng = np.random.default_rng(2024)
        grid = build_grid((1.0,), (16,))
        xi = XiGrid(bins=32)
        for _ in range(1000):
            snapshots = [
                CellField(grid, rng.uniform(size=16), kind="density") for _ in range(4)
            ]
            box_cells = int(rng.choice([1, 2, 4, 8, 16]))
            box_steps = int(rng.choice([1, 2, 4]))
            averaged = self.toolkit.box_average(snapshots, box_cells, box_steps, xi)
            assert averaged.is_monotone()
            assert self.toolkit.rho_bound_check(averaged) <= 1e-12


class TestRigidityAndBoxes:
    """Test the rigidity defect and box averaging."""

    def setup_method(self):
        """Set up test fixtures."""
        self.toolkit = KineticToolkit()

    def test_rigidity_of_half(self):
        """Test integral of f - f^2 for f = 1/2 equals |domain| / 4."""
        grid = build_grid((1.0,), (4,))
        f = KineticField(grid, XiGrid(bins=10), np.full((1, 4, 10), 0.5))
        assert self.toolkit.rigidity_defect(f) == pytest.approx(0.25)

    def test_rigidity_of_indicator(self):
        """Test lifts of bin-edge values have zero defect."""
        grid = build_grid((1.0,), (4,))
        xi = XiGrid(bins=8)
        u = CellField(grid, np.array([0.0, 0.25, 0.5, 1.0]), kind="density")
        f = self.toolkit.lift_indicator(u, xi)
        assert self.toolkit.rigidity_defect(f) == 0.0

    def test_checkerboard_average(self):
        """Test averaging a 0/1 checkerboard over pairs gives |domain| / 4."""
        grid = build_grid((1.0,), (16,))
        values = np.tile([0.0, 1.0], 8)
        u = CellField(grid, values, kind="density")
        f = self.toolkit.box_average([u], 2, 1, XiGrid(bins=64))
        assert f.grid.cells == (8,)
        assert np.allclose(f.values, 0.5)
        assert self.toolkit.rigidity_defect(f) == pytest.approx(0.25)

    def test_box_average_shapes(self):
        """Test slabs and coarse cells of a 2D space-time average."""
        grid = build_grid((1.0, 1.0), (8, 4))
        snapshots = [CellField(grid, np.full((8, 4), 0.5), kind="density")] * 6
        f = self.toolkit.box_average(snapshots, (2, 2), 3, XiGrid(bins=16))
        assert f.values.shape == (2, 4, 2, 16)

    def test_box_sizes_must_divide(self):
        """Test boxes that do not tile the grid or the snapshots raise."""
        grid = build_grid((1.0,), (12,))
        xi = XiGrid(bins=16)
        snapshots = [CellField(grid, np.zeros(12), kind="density")] * 4
        with pytest.raises(BoxSizeError):
            self.toolkit.box_average(snapshots, 5, 1, xi)
        with pytest.raises(BoxSizeError):
            self.toolkit.box_average(snapshots, 3, 3, xi)
        with pytest.raises(BoxSizeError):
            self.toolkit.box_average([], 3, 1, xi)


class TestKineticTransport:
    """Test the semi-Lagrangian transport-collapse step."""

    def setup_method(self):
        """Set up test fixtures."""
        self.toolkit = KineticToolkit()
        self.grid = build_grid((1.0,), (8,))
        self.xi = XiGrid(bins=16)

    def test_constant_state_keeps_its_mass(self):
        """Test u = S = 1/2 stays at 1/2 after a step."""
        u = CellField(self.grid, np.full(8, 0.5), kind="density")
        f = self.toolkit.lift_indicator(u, self.xi)
        f_new = self.toolkit.kinetic_step(f, u.with_values(u.values, "potential"), dt=0.5)
        assert self.toolkit.is_indicator(f_new)
        assert np.allclose(self.toolkit.integrate(f_new)[0], 0.5, atol=1e-12)

    def test_step_above_one_cell_is_rejected(self):
        """Test characteristic feet may move at most one cell or bin."""
        u = CellField(self.grid, np.full(8, 0.5), kind="density")
        S = CellField(self.grid, np.linspace(0.0, 1.0, 8), kind="potential")
        velocity = FaceField(self.grid, (np.concatenate([[0.0], np.full(7, 8.0), [0.0]]),))
        f = self.toolkit.lift_indicator(u, self.xi)
        with pytest.raises(CFLViolationError):
            self.toolkit.transport(f, S, velocity, dt=1.0)

    def test_transport_keeps_values_in_range(self):
        """Test transported fields stay in [0, 1] and collapse without negative defect."""
        rng = np.random.default_rng(5)
        u = CellField(self.grid, rng.uniform(size=8), kind="density")
        S = CellField(self.grid, rng.uniform(size=8), kind="potential")
        f = self.toolkit.lift_indicator(u, self.xi)
        velocity = FaceField(
            self.grid,
            (np.concatenate([[0.0], np.diff(S.values) / self.grid.spacing[0], [0.0]]),),
        )
        numbers = self.toolkit.courant_numbers(S, velocity, self.xi, 1.0)
        dt = 0.9 / max(numbers)
        moved = self.toolkit.transport(f, S, velocity, dt)
        assert moved.values.min() >= 0.0 and moved.values.max() <= 1.0
        _, _, defect = self.toolkit.collapse_to_indicator(moved)
        assert defect.values.min() >= 0.0
