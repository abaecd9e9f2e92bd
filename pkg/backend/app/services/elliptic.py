"""
Screened Poisson solver for (I - Laplacian) S = u with Neumann or periodic boundaries.
"""

import math
from typing import NoReturn

import numpy as np
import scipy.sparse as sp
from scipy.linalg import solve_banded, solve_circulant
from scipy.sparse.linalg import LinearOperator, cg

from app.constants import (
    DEFAULT_ELLIPTIC_TOL,
    ELLIPTIC_ITERATION_FACTOR,
    MAX_ELLIPTIC_TOL,
    MIN_ELLIPTIC_TOL,
)
from app.exceptions import ConfigurationError, EllipticSolverError
from app.models.fields import CellField, FaceField, require_same_grid
from app.models.grid import Grid
from app.models.reports import EllipticSolveReport
from app.services.field_calculus import face_difference, laplacian
from app.utils.logger import setup_logger

logger = setup_logger("elliptic")


def _second_difference(n: int, h: float, periodic: bool) -> sp.csr_matrix:
    """1D matrix of -d2/dx2 (positive semidefinite)."""
    main = np.full(n, 2.0)
    off = np.full(n - 1, -1.0)
    if not periodic:
        main[0] = main[-1] = 1.0
    mat = sp.diags([off, main, off], [-1, 0, 1], format="lil")
    if periodic:
        mat[0, n - 1] = -1.0
        mat[n - 1, 0] = -1.0
    return sp.csr_matrix(mat.tocsr() / (h * h))


def operator_matrix(grid: Grid) -> sp.csr_matrix:
    """Sparse matrix of I - Laplacian_h in C (row-major) cell ordering."""
    periodic = grid.is_periodic
    blocks = [
        _second_difference(n, h, periodic)
        for n, h in zip(grid.cells, grid.spacing, strict=True)
    ]
    identity = sp.identity(grid.n_cells, format="csr")
    if grid.dim == 1:
        return sp.csr_matrix(identity + blocks[0])
    ix = sp.identity(grid.cells[0], format="csr")
    iy = sp.identity(grid.cells[1], format="csr")
    return sp.csr_matrix(identity + sp.kron(blocks[0], iy) + sp.kron(ix, blocks[1]))


class EllipticSolver:
    """
    Solves the screened Poisson equation for the chemical potential S.

    1D grids use a direct solve (banded elimination for walls, FFT
    circulant solve for a ring); 2D grids use conjugate gradients with a
    Jacobi preconditioner. Each direct solve is followed by residual
    correction steps until the scaled residual is below the tolerance.
    """

    def __init__(self, tol: float = DEFAULT_ELLIPTIC_TOL):
        self.tol = self._check_tol(tol)

    @staticmethod
    def _check_tol(tol: float) -> float:
        if not MIN_ELLIPTIC_TOL <= tol <= MAX_ELLIPTIC_TOL:
            raise ConfigurationError(
                "numerics.elliptic_tol",
                f"tolerance {tol} outside [{MIN_ELLIPTIC_TOL}, {MAX_ELLIPTIC_TOL}]",
            )
        return tol

    def solve_potential(
        self, u: CellField, tol: float | None = None
    ) -> tuple[CellField, EllipticSolveReport]:
        """
        Solve (I - Laplacian_h) S = u.

        Args:
            u: Density field with values in [0, 1]
            tol: Scaled residual tolerance (defaults to the solver tolerance)

        Returns:
            Potential S (tagged as a potential) and the solve report

        Raises:
            EllipticSolverError: If the residual does not reach the tolerance
                within 10 x (cell count) iterations
        """
        tol = self.tol if tol is None else self._check_tol(tol)
        grid = u.grid
        rhs = u.values
        u_min, u_max = float(rhs.min()), float(rhs.max())

        if u_min == u_max:
            # Constants solve the equation exactly
            S = rhs.copy()
            method, iterations = "constant", 0
        elif grid.dim == 1:
            S, method, iterations = self._solve_direct(grid, rhs, tol)
        else:
            S, method, iterations = self._solve_cg(grid, rhs, tol)

        # Maximum principle holds exactly for this M-matrix; clip round-off only
        S = np.clip(S, u_min, u_max)
        scaled, absolute = self.scaled_residual(grid, rhs, S)
        report = EllipticSolveReport(
            method=method,
            iterations=iterations,
            residual=scaled,
            absolute_residual=absolute,
            s_min=float(S.min()),
            s_max=float(S.max()),
        )
        logger.debug(
            "Elliptic solve (%s): %d iterations, scaled residual %.3e",
            method,
            iterations,
            scaled,
        )
        return CellField(grid, S, kind="potential"), report

    def _solve_direct(
        self, grid: Grid, rhs: np.ndarray, tol: float
    ) -> tuple[np.ndarray, str, int]:
        n = grid.cells[0]
        h = grid.spacing[0]
        inv_h2 = 1.0 / (h * h)
        if grid.is_periodic:
            column = np.zeros(n)
            column[0] = 1.0 + 2.0 * inv_h2
            column[1] = -inv_h2
            column[-1] = -inv_h2

            def solve(b: np.ndarray) -> np.ndarray:
                return np.real(solve_circulant(column, b))

            method = "circulant"
        else:
            bands = np.zeros((3, n))
            bands[0, 1:] = -inv_h2
            bands[1, :] = 1.0 + 2.0 * inv_h2
            bands[1, 0] = bands[1, -1] = 1.0 + inv_h2
            bands[2, :-1] = -inv_h2

            def solve(b: np.ndarray) -> np.ndarray:
                return np.asarray(solve_banded((1, 1), bands, b))

            method = "banded"

        S = solve(rhs)
        cap = ELLIPTIC_ITERATION_FACTOR * n
        iterations = 0
        while self.scaled_residual(grid, rhs, S)[0] > tol:
            if iterations >= cap:
                self._fail(method, iterations, grid, rhs, S, tol)
            residual = rhs - self.apply_operator(grid, S)
            S = S + solve(residual)
            iterations += 1
        return S, method, iterations

    def _solve_cg(
        self, grid: Grid, rhs: np.ndarray, tol: float
    ) -> tuple[np.ndarray, str, int]:
        matrix = operator_matrix(grid)
        inv_diag = 1.0 / matrix.diagonal()
        preconditioner = LinearOperator(
            matrix.shape, matvec=lambda x: inv_diag * x, dtype=float
        )
        b = rhs.ravel()
        cap = ELLIPTIC_ITERATION_FACTOR * grid.n_cells
        rtol = tol / math.sqrt(grid.n_cells)
        iterations = 0

        def count(_xk: np.ndarray) -> None:
            nonlocal iterations
            iterations += 1

        x = b.copy()
        while True:
            remaining = cap - iterations
            if remaining <= 0:
                self._fail("cg", iterations, grid, rhs, x.reshape(grid.shape), tol)
            before = iterations
            x, _info = cg(
                matrix,
                b,
                x0=x,
                rtol=rtol,
                atol=0.0,
                maxiter=remaining,
                M=preconditioner,
                callback=count,
            )
            S = x.reshape(grid.shape)
            if self.scaled_residual(grid, rhs, S)[0] <= tol:
                return S, "cg", iterations
            if iterations == before:
                self._fail("cg", iterations, grid, rhs, S, tol)

    def _fail(
        self,
        method: str,
        iterations: int,
        grid: Grid,
        rhs: np.ndarray,
        S: np.ndarray,
        tol: float,
    ) -> NoReturn:
        scaled, _ = self.scaled_residual(grid, rhs, S)
        logger.error(
            "Elliptic solve (%s) stalled after %d iterations: residual %.3e > %.3e",
            method,
            iterations,
            scaled,
            tol,
        )
        raise EllipticSolverError(
            f"{method} solve did not converge in {iterations} iterations "
            f"(scaled residual {scaled:.3e}, tolerance {tol:.1e})"
        )

    @staticmethod
    def apply_operator(grid: Grid, S: np.ndarray) -> np.ndarray:
        """(I - Laplacian_h) S by stencil."""
        return S - laplacian(grid, S)

    @classmethod
    def scaled_residual(
        cls, grid: Grid, rhs: np.ndarray, S: np.ndarray
    ) -> tuple[float, float]:
        """Scaled and absolute max-norm residuals of (I - Laplacian_h) S = rhs."""
        absolute = float(np.abs(cls.apply_operator(grid, S) - rhs).max())
        op_norm = 1.0 + sum(4.0 / (h * h) for h in grid.spacing)
        scale = op_norm * float(np.abs(S).max()) + float(np.abs(rhs).max())
        if scale == 0.0:
            return absolute, absolute
        return absolute / scale, absolute

    def face_gradient(self, S: CellField) -> FaceField:
        """(S_right - S_left) / h at every face; 0 on Neumann walls."""
        grid = S.grid
        return FaceField(
            grid,
            tuple(
                face_difference(grid, S.values, axis) / h
                for axis, h in enumerate(grid.spacing)
            ),
        )

    def elliptic_residual(self, u: CellField, S: CellField) -> CellField:
        """Cellwise (I - Laplacian_h) S - u."""
        grid = require_same_grid(u, S)
        return CellField(grid, self.apply_operator(grid, S.values) - u.values)
