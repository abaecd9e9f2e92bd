"""
Integrals, norms and staggered difference stencils on structured grids.
"""

import math

import numpy as np

from app.exceptions import GridError
from app.models.fields import CellField
from app.models.grid import Grid
from app.models.reports import FieldNorms


def field_integral(f: CellField) -> float:
    """
    Discrete integral sum(f_i) * cell volume with compensated summation.

    Args:
        f: Field on a grid

    Returns:
        Integral of f over the domain
    """
    return math.fsum(f.values.ravel().tolist()) * f.grid.cell_volume


def field_norms(f: CellField) -> FieldNorms:
    """Volume-weighted L1 and L2 norms and the unweighted max norm."""
    flat = np.abs(f.values.ravel())
    vol = f.grid.cell_volume
    l1 = math.fsum(flat.tolist()) * vol
    l2 = math.sqrt(math.fsum((flat * flat).tolist()) * vol)
    linf = float(flat.max()) if flat.size else 0.0
    return FieldNorms(l1=l1, l2=l2, linf=linf)


def check_shape(grid: Grid, values: np.ndarray) -> None:
    if values.shape != grid.shape:
        raise GridError(f"Array shape {values.shape} does not match grid {grid.shape}")


def face_difference(grid: Grid, values: np.ndarray, axis: int) -> np.ndarray:
    """
    Right minus left cell value at every face normal to `axis`.

    Neumann wall faces get 0 (mirrored ghost cells); on a torus face i
    sits between cell i and cell i + 1 (mod n).
    """
    if grid.is_periodic:
        return np.roll(values, -1, axis=axis) - values
    out = np.zeros(grid.face_shape(axis))
    inner = [slice(None)] * grid.dim
    inner[axis] = slice(1, -1)
    out[tuple(inner)] = np.diff(values, axis=axis)
    return out


def face_divergence(grid: Grid, face_values: np.ndarray, axis: int) -> np.ndarray:
    """Outgoing minus incoming face value per cell along `axis` (not divided by h)."""
    if grid.is_periodic:
        return face_values - np.roll(face_values, 1, axis=axis)
    return np.diff(face_values, axis=axis)


def left_states(grid: Grid, values: np.ndarray, axis: int) -> np.ndarray:
    """Cell value on the left of every face (walls copy the adjacent cell)."""
    if grid.is_periodic:
        return values
    pad = [(0, 0)] * grid.dim
    pad[axis] = (1, 0)
    return np.pad(values, pad, mode="edge")


def right_states(grid: Grid, values: np.ndarray, axis: int) -> np.ndarray:
    """Cell value on the right of every face (walls copy the adjacent cell)."""
    if grid.is_periodic:
        return np.roll(values, -1, axis=axis)
    pad = [(0, 0)] * grid.dim
    pad[axis] = (0, 1)
    return np.pad(values, pad, mode="edge")


def laplacian(grid: Grid, values: np.ndarray) -> np.ndarray:
    """3-point (1D) / 5-point (2D) Laplacian with Neumann mirroring or wraparound."""
    check_shape(grid, values)
    out = np.zeros(grid.shape)
    for axis, h in enumerate(grid.spacing):
        out += face_divergence(grid, face_difference(grid, values, axis), axis) / (h * h)
    return out


def cell_gradient(grid: Grid, values: np.ndarray) -> tuple[np.ndarray, ...]:
    """
    Cell-centred gradient: central differences inside, one-sided at walls,
    central with wraparound on a torus.
    """
    check_shape(grid, values)
    grads = []
    for axis, h in enumerate(grid.spacing):
        if grid.is_periodic:
            grads.append(
                (np.roll(values, -1, axis=axis) - np.roll(values, 1, axis=axis)) / (2 * h)
            )
        else:
            grads.append(np.gradient(values, h, axis=axis, edge_order=1))
    return tuple(grads)


def face_to_cell(grid: Grid, face_values: np.ndarray, axis: int) -> np.ndarray:
    """Average of the two faces bounding each cell along `axis`."""
    if grid.is_periodic:
        return 0.5 * (face_values + np.roll(face_values, 1, axis=axis))
    lo = [slice(None)] * grid.dim
    hi = [slice(None)] * grid.dim
    lo[axis] = slice(0, -1)
    hi[axis] = slice(1, None)
    return 0.5 * (face_values[tuple(lo)] + face_values[tuple(hi)])
