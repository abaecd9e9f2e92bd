"""
Pydantic models for solver reports, diagnostics rows, study results and manifests.
"""

from dataclasses import dataclass, field
from typing import Any

from pydantic import BaseModel, ConfigDict, Field

from app.models.fields import CellField
from app.models.grid import GridSpec


class EllipticSolveReport(BaseModel):
    """
    Outcome of one screened Poisson solve.

    `residual` is the scaled max-norm residual ||r|| / (||A|| ||S|| + ||u||)
    that is compared against the tolerance; `absolute_residual` is ||r||.
    """

    model_config = ConfigDict(frozen=True)

    method: str
    iterations: int = Field(..., ge=0)
    residual: float = Field(..., ge=0.0)
    absolute_residual: float = Field(..., ge=0.0)
    s_min: float
    s_max: float


class StepReport(BaseModel):
    """Bookkeeping of one transport step."""

    model_config = ConfigDict(frozen=True)

    dt: float
    max_face_speed: float
    mass_before: float
    mass_after: float
    bound_violation: float = 0.0

    @property
    def mass_drift(self) -> float:
        return abs(self.mass_after - self.mass_before)


class FieldNorms(BaseModel):
    """Discrete L1, L2 (volume weighted) and max norms."""

    model_config = ConfigDict(frozen=True)

    l1: float
    l2: float
    linf: float


class DiagnosticsRecord(BaseModel):
    """
    One diagnostics row, taken at the state u(t) before the step from t.

    Attributes:
        t: Time of the state
        dt: Step taken from t (0 on the final row)
        mass: Integral of u
        energy: Free energy E = integral of u S
        dissipation: Transport dissipation D
        viscous_rate: Viscous contribution 2 eps integral of u (S - u)
        cumulative_dissipation: Sum of dt D over the steps before t
        entropy_residuals: Max positive Kruzkov residual of the step, per level
        defect_mass: Viscous defect mass (finite volume) or collapse defect (kinetic)
        bound_violation: Distance of u outside [0, 1]
    """

    model_config = ConfigDict(frozen=True)

    step: int = 0
    t: float
    dt: float = 0.0
    mass: float
    energy: float
    dissipation: float
    viscous_rate: float = 0.0
    cumulative_dissipation: float = 0.0
    entropy_residuals: dict[str, float] = Field(default_factory=dict)
    defect_mass: float = 0.0
    bound_violation: float = 0.0

    @property
    def max_entropy_residual(self) -> float:
        return max(self.entropy_residuals.values(), default=0.0)


class EnergyCheck(BaseModel):
    """Result of the discrete free-energy identity check on a trajectory."""

    model_config = ConfigDict(frozen=True)

    max_deviation: float
    worst_drop: float
    monotone: bool
    cumulative_dissipation: float
    cumulative_bound: float
    within_bound: bool

    @property
    def passed(self) -> bool:
        return self.monotone and self.within_bound


class SteadyStateResiduals(BaseModel):
    """Transport, elliptic and support residuals of a candidate steady state."""

    model_config = ConfigDict(frozen=True)

    transport: float
    elliptic: float
    support: float
    max_face_flux: float = 0.0


class EntropyAudit(BaseModel):
    """Max positive Kruzkov residuals of one step against the 5 (dx + dt) gate."""

    model_config = ConfigDict(frozen=True)

    dt: float
    threshold: float
    residuals: dict[str, float]

    @property
    def passed(self) -> bool:
        return all(r <= self.threshold for r in self.residuals.values())


class CheckReport(BaseModel):
    """Audit of a stored snapshot."""

    model_config = ConfigDict(frozen=True)

    t: float
    grid: GridSpec
    steady: SteadyStateResiduals
    lemma_violation: float
    entropy: EntropyAudit
    passed: bool


class StudyReport(BaseModel):
    """
    Measurements and gate outcomes of one study.

    Attributes:
        name: Study name
        config_hash: SHA-256 of the canonical configuration
        table: One row of measured quantities per parameter value
        gates: Gate name -> pass/fail
        artifacts: Paths of files written for this study
        notes: Free-form remarks (e.g. dwell time truncated by the run length)
    """

    name: str
    config_hash: str
    table: list[dict[str, float | int | str]] = Field(default_factory=list)
    gates: dict[str, bool] = Field(default_factory=dict)
    artifacts: list[str] = Field(default_factory=list)
    notes: list[str] = Field(default_factory=list)

    @property
    def passed(self) -> bool:
        return all(self.gates.values())

    @property
    def failed_gates(self) -> list[str]:
        return [name for name, ok in self.gates.items() if not ok]


class ManifestEntry(BaseModel):
    """One emitted file and its role."""

    path: str
    role: str


class RunManifest(BaseModel):
    """Everything a run or study wrote, with the configuration that produced it."""

    version: str
    config: dict[str, Any]
    config_hash: str
    grid: GridSpec
    files: list[ManifestEntry] = Field(default_factory=list)

    def add(self, path: str, role: str) -> None:
        self.files.append(ManifestEntry(path=path, role=role))


class RunSummary(BaseModel):
    """Short summary of a run returned by the HTTP surface."""

    backend: str
    steps: int
    final_time: float
    mass_drift: float
    u_min: float
    u_max: float
    final_energy: float
    cumulative_dissipation: float
    max_entropy_residual: float
    bound_violation: float


@dataclass(frozen=True, eq=False)
class Snapshot:
    """State at one output time."""

    t: float
    u: CellField
    S: CellField


@dataclass(eq=False)
class Trajectory:
    """Snapshots at the output cadence plus one diagnostics row per step."""

    snapshots: list[Snapshot] = field(default_factory=list)
    records: list[DiagnosticsRecord] = field(default_factory=list)
    step_reports: list[StepReport] = field(default_factory=list)
    epsilon: float = 0.0
    backend: str = "finite-volume"

    @property
    def final(self) -> Snapshot:
        return self.snapshots[-1]

    @property
    def steps(self) -> int:
        return max(len(self.records) - 1, 0)

    @property
    def time_integrated_defect(self) -> float:
        return sum(r.dt * r.defect_mass for r in self.records)

    def extend(self, continuation: "Trajectory") -> None:
        """
        Append a run started from this trajectory's final state.

        Times, step numbers and cumulative dissipation of the continuation are
        shifted. Its first row replaces our final row and its first snapshot,
        a copy of our final one, is dropped.
        """
        if not self.records or not continuation.records:
            raise ValueError("Both trajectories need diagnostics rows")
        last = self.records[-1]
        offset = self.final.t
        self.records = self.records[:-1] + [
            r.model_copy(
                update={
                    "t": r.t + offset,
                    "step": r.step + last.step,
                    "cumulative_dissipation": r.cumulative_dissipation + last.cumulative_dissipation,
                }
            )
            for r in continuation.records
        ]
        self.snapshots.extend(Snapshot(s.t + offset, s.u, s.S) for s in continuation.snapshots[1:])
        self.step_reports.extend(continuation.step_reports)
