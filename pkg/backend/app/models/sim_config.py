"""
Pydantic models for simulation configuration files.
"""

from typing import Literal

from pydantic import BaseModel, ConfigDict, Field, field_validator, model_validator

from app.constants import (
    DEFAULT_CFL,
    DEFAULT_ELLIPTIC_TOL,
    DEFAULT_KRUZKOV_LEVELS,
    DEFAULT_XI_BINS,
    INITIAL_PRESETS,
    MAX_CFL,
    MAX_ELLIPTIC_TOL,
    MIN_CELLS_PER_AXIS,
    MIN_ELLIPTIC_TOL,
    MIN_XI_BINS,
    STUDY_NAMES,
)
from app.models.grid import GridSpec

ParamValue = float | int | str | list[float] | list[list[float]]


class GridSection(BaseModel):
    """Grid geometry: axis lengths, cell counts and boundary kind."""

    model_config = ConfigDict(extra="forbid", frozen=True)

    lengths: list[float] = Field(..., description="Axis lengths")
    cells: list[int] = Field(..., description="Cells per axis")
    boundary: Literal["neumann", "periodic"] = "neumann"

    @field_validator("lengths")
    @classmethod
    def validate_lengths(cls, v: list[float]) -> list[float]:
        """Validate axis lengths."""
        if not 1 <= len(v) <= 2:
            raise ValueError("Grid must have 1 or 2 axes")
        if any(length <= 0 for length in v):
            raise ValueError("Axis lengths must be positive")
        return v

    @field_validator("cells")
    @classmethod
    def validate_cells(cls, v: list[int]) -> list[int]:
        """Validate cell counts."""
        if not 1 <= len(v) <= 2:
            raise ValueError("Grid must have 1 or 2 axes")
        if any(n < MIN_CELLS_PER_AXIS for n in v):
            raise ValueError(f"Each axis needs at least {MIN_CELLS_PER_AXIS} cells")
        return v

    @model_validator(mode="after")
    def validate_dimension(self) -> "GridSection":
        """Lengths and cells must agree in dimension."""
        if len(self.lengths) != len(self.cells):
            raise ValueError("lengths and cells must have the same number of axes")
        return self

    def to_spec(self) -> GridSpec:
        return GridSpec(
            lengths=tuple(self.lengths), cells=tuple(self.cells), boundary=self.boundary
        )


class InitialSection(BaseModel):
    """Initial-data preset and its parameters."""

    model_config = ConfigDict(extra="forbid", frozen=True)

    preset: str = "cosine-perturbation"
    params: dict[str, ParamValue] = Field(default_factory=dict)

    @field_validator("preset")
    @classmethod
    def validate_preset(cls, v: str) -> str:
        """Validate preset name."""
        if v not in INITIAL_PRESETS:
            raise ValueError(
                f"Unknown preset: {v}. Valid presets are: {', '.join(INITIAL_PRESETS)}"
            )
        return v


class PhysicsSection(BaseModel):
    """Model parameters: viscosity, final time and initial data."""

    model_config = ConfigDict(extra="forbid", frozen=True)

    epsilon: float = Field(0.0, ge=0.0, description="Viscosity")
    final_time: float = Field(..., gt=0.0, description="Final time T")
    initial: InitialSection = Field(default_factory=InitialSection)


class NumericsSection(BaseModel):
    """Discretization choices."""

    model_config = ConfigDict(extra="forbid", frozen=True)

    cfl: float = Field(DEFAULT_CFL, gt=0.0, le=MAX_CFL, description="CFL number")
    backend: Literal["finite-volume", "kinetic"] = "finite-volume"
    flux: Literal["godunov", "lax-friedrichs"] = "godunov"
    xi_bins: int = Field(DEFAULT_XI_BINS, ge=MIN_XI_BINS)
    elliptic_tol: float = Field(
        DEFAULT_ELLIPTIC_TOL, ge=MIN_ELLIPTIC_TOL, le=MAX_ELLIPTIC_TOL
    )
    face_state: Literal["godunov", "mean"] = "mean"
    kruzkov_levels: list[float] = Field(
        default_factory=lambda: list(DEFAULT_KRUZKOV_LEVELS)
    )
    strict_entropy: bool = False

    @field_validator("kruzkov_levels")
    @classmethod
    def validate_levels(cls, v: list[float]) -> list[float]:
        """Kruzkov levels live in [0, 1]."""
        if any(not 0.0 <= k <= 1.0 for k in v):
            raise ValueError("Kruzkov levels must lie in [0, 1]")
        return v


class OutputSection(BaseModel):
    """Snapshot and diagnostics cadence."""

    model_config = ConfigDict(extra="forbid", frozen=True)

    snapshot_interval: float | None = Field(None, gt=0.0)
    diagnostics_every: int = Field(1, ge=1)
    write_snapshots: bool = True


class ExperimentSection(BaseModel):
    """Study selector and study parameters."""

    model_config = ConfigDict(extra="forbid", frozen=True)

    name: str | None = None
    epsilon_ladder: list[float] = Field(
        default_factory=lambda: [0.02, 0.01, 0.005, 0.0025, 0.00125]
    )
    box_cells: list[int] = Field(default_factory=lambda: [40, 20, 10])
    box_steps: list[int] = Field(default_factory=lambda: [8, 4, 2])
    refinements: int = Field(3, ge=2)
    regime_epsilon: float = Field(0.002, ge=0.0)
    regime_final_time: float | None = Field(None, gt=0.0)
    constant_epsilon: float = Field(0.3, gt=0.25)
    constant_cells: int = Field(32, ge=MIN_CELLS_PER_AXIS)
    workers: int | None = Field(None, ge=1)

    @field_validator("name")
    @classmethod
    def validate_name(cls, v: str | None) -> str | None:
        """Validate study name."""
        if v is not None and v not in STUDY_NAMES:
            raise ValueError(
                f"Unknown study: {v}. Valid studies are: {', '.join(STUDY_NAMES)}"
            )
        return v

    @field_validator("epsilon_ladder")
    @classmethod
    def validate_ladder(cls, v: list[float]) -> list[float]:
        """Ladder values are nonnegative and strictly decreasing."""
        if any(e < 0 for e in v):
            raise ValueError("Ladder viscosities must be nonnegative")
        if any(b >= a for a, b in zip(v, v[1:], strict=False)):
            raise ValueError("Ladder must be strictly decreasing")
        return v

    @model_validator(mode="after")
    def validate_boxes(self) -> "ExperimentSection":
        """Box cell and step ladders pair up."""
        if len(self.box_cells) != len(self.box_steps):
            raise ValueError("box_cells and box_steps must have equal length")
        if any(b < 1 for b in self.box_cells + self.box_steps):
            raise ValueError("Box sizes must be positive")
        return self


class SimConfig(BaseModel):
    """
    Complete, validated simulation configuration.

    Attributes:
        grid: Grid geometry
        physics: Viscosity, final time and initial data
        numerics: CFL number, backend, flux, xi bins, elliptic tolerance
        output: Snapshot and diagnostics cadence
        experiment: Study selector and study parameters
    """

    model_config = ConfigDict(extra="forbid", frozen=True)

    grid: GridSection
    physics: PhysicsSection
    numerics: NumericsSection = Field(default_factory=NumericsSection)
    output: OutputSection = Field(default_factory=OutputSection)
    experiment: ExperimentSection = Field(default_factory=ExperimentSection)

    @property
    def snapshot_interval(self) -> float:
        """Configured interval, or a tenth of the final time."""
        if self.output.snapshot_interval is not None:
            return self.output.snapshot_interval
        return self.physics.final_time / 10.0

    def with_changes(
        self,
        *,
        epsilon: float | None = None,
        final_time: float | None = None,
        cells: list[int] | None = None,
        initial: InitialSection | None = None,
        snapshot_interval: float | None = None,
        backend: Literal["finite-volume", "kinetic"] | None = None,
        xi_bins: int | None = None,
        kruzkov_levels: list[float] | None = None,
        face_state: Literal["godunov", "mean"] | None = None,
    ) -> "SimConfig":
        """Copy with selected fields replaced (used by studies)."""
        physics_update: dict[str, object] = {}
        if epsilon is not None:
            physics_update["epsilon"] = epsilon
        if final_time is not None:
            physics_update["final_time"] = final_time
        numerics_update: dict[str, object] = {}
        if backend is not None:
            numerics_update["backend"] = backend
        if xi_bins is not None:
            numerics_update["xi_bins"] = xi_bins
        if face_state is not None:
            numerics_update["face_state"] = face_state
        if kruzkov_levels is not None:
            numerics_update["kruzkov_levels"] = kruzkov_levels
        data = self.model_dump()
        data["physics"].update(physics_update)
        data["numerics"].update(numerics_update)
        if initial is not None:
            data["physics"]["initial"] = initial.model_dump()
        if cells is not None:
            data["grid"]["cells"] = cells
        if snapshot_interval is not None:
            data["output"]["snapshot_interval"] = snapshot_interval
        return SimConfig.model_validate(data)
