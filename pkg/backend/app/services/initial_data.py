"""
Initial-data presets for the density u0.

Every preset is evaluated at cell centres and clipped to [0, 1].
"""

from collections.abc import Callable, Mapping
from typing import Any

import numpy as np

from app.constants import ERROR_MESSAGES, INITIAL_PRESETS
from app.exceptions import ConfigurationError
from app.models.fields import CellField
from app.models.grid import Grid
from app.utils.logger import setup_logger

logger = setup_logger("initial_data")

PresetParams = Mapping[str, Any]


class InitialDataFactory:
    """
    Builds u0 from a named preset.

    Presets (parameters and defaults):
        constant: value=0.5
        riemann: left=1, right=0, x0=L/2, axis=0 (step across x0 along `axis`)
        smooth-bumps: centers=[L/2], width=0.1, height=0.8, base=0
            (base + sum of Gaussian bumps height * exp(-|y - c|^2 / width^2))
        cosine-perturbation: mean=0.5, amp=0.1, mode=1
            (mean + amp * prod over axes of cos(2 pi mode y / L))
        random-cellwise: low=0, high=1, seed=0 (independent uniform values)
    """

    def __init__(self) -> None:
        self._builders: dict[str, Callable[[Grid, PresetParams], np.ndarray]] = {
            "constant": self._constant,
            "riemann": self._riemann,
            "smooth-bumps": self._smooth_bumps,
            "cosine-perturbation": self._cosine,
            "random-cellwise": self._random,
        }

    def build(self, preset: str, params: PresetParams, grid: Grid) -> CellField:
        """
        Evaluate a preset on a grid.

        Args:
            preset: Preset name
            params: Preset parameters (missing ones take their defaults)
            grid: Target grid

        Returns:
            Density field with values in [0, 1]

        Raises:
            ConfigurationError: Unknown preset or malformed parameters
        """
        builder = self._builders.get(preset)
        if builder is None:
            logger.error("Unknown preset requested: %s", preset)
            raise ConfigurationError(
                "physics.initial.preset",
                f"{ERROR_MESSAGES['UNKNOWN_PRESET']} '{preset}' "
                f"(valid: {', '.join(INITIAL_PRESETS)})",
            )
        try:
            values = builder(grid, params)
        except (TypeError, ValueError, IndexError) as e:
            raise ConfigurationError("physics.initial.params", str(e)) from e

        logger.debug("Built preset %s on grid %s", preset, grid.cells)
        return CellField(grid, np.clip(values, 0.0, 1.0), kind="density")

    @staticmethod
    def _constant(grid: Grid, params: PresetParams) -> np.ndarray:
        return np.full(grid.shape, float(params.get("value", 0.5)))

    @staticmethod
    def _riemann(grid: Grid, params: PresetParams) -> np.ndarray:
        axis = int(params.get("axis", 0))
        if not 0 <= axis < grid.dim:
            raise ValueError(f"riemann axis {axis} outside the grid dimension")
        x0 = float(params.get("x0", 0.5 * grid.lengths[axis]))
        left = float(params.get("left", 1.0))
        right = float(params.get("right", 0.0))
        coords = grid.mesh()[axis]
        return np.where(coords < x0, left, right)

    @staticmethod
    def _smooth_bumps(grid: Grid, params: PresetParams) -> np.ndarray:
        raw = params.get("centers", [[length / 2 for length in grid.lengths]])
        centers = [np.atleast_1d(np.asarray(c, dtype=float)) for c in raw]
        width = float(params.get("width", 0.1))
        if width <= 0:
            raise ValueError("smooth-bumps width must be positive")
        height = float(params.get("height", 0.8))
        base = float(params.get("base", 0.0))
        mesh = grid.mesh()
        values = np.full(grid.shape, base)
        for center in centers:
            if center.size != grid.dim:
                raise ValueError(f"Bump centre {center.tolist()} needs {grid.dim} coordinates")
            r2 = sum((mesh[a] - center[a]) ** 2 for a in range(grid.dim))
            values += height * np.exp(-r2 / width**2)
        return values

    @staticmethod
    def _cosine(grid: Grid, params: PresetParams) -> np.ndarray:
        mean = float(params.get("mean", 0.5))
        amp = float(params.get("amp", 0.1))
        mode = float(params.get("mode", 1))
        mesh = grid.mesh()
        profile = np.ones(grid.shape)
        for a in range(grid.dim):
            profile = profile * np.cos(2 * np.pi * mode * mesh[a] / grid.lengths[a])
        return mean + amp * profile

    @staticmethod
    def _random(grid: Grid, params: PresetParams) -> np.ndarray:
        low = float(params.get("low", 0.0))
        high = float(params.get("high", 1.0))
        rng = np.random.default_rng(int(params.get("seed", 0)))
        return rng.uniform(low, high, size=grid.shape)


_factory = InitialDataFactory()


def initial_data(preset: str, params: PresetParams, grid: Grid) -> CellField:
    """Evaluate a named initial-data preset on `grid`."""
    return _factory.build(preset, params, grid)
