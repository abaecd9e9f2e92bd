"""
Constants for the quorum-sensing Keller-Segel laboratory.
"""

# Flux law g(u) = u (1 - u)
SONIC_POINT = 0.5
SONIC_FLUX = 0.25
MAX_WAVE_SPEED = 1.0  # max |g'| on [0, 1]

# Bound slack for densities, potentials and kinetic fields
BOUND_SLACK = 1e-12
# advance() aborts above this excess
BOUND_ABORT = 1e-10

# Grid limits
MIN_CELLS_PER_AXIS = 4
MAX_DIMENSION = 2

# Numerics defaults
DEFAULT_CFL = 0.9
MAX_CFL = 0.95
# monotonicity limit checked before a step is taken
STABILITY_LIMIT = 1.0
DEFAULT_XI_BINS = 64
MIN_XI_BINS = 16
DEFAULT_ELLIPTIC_TOL = 1e-12
MIN_ELLIPTIC_TOL = 1e-14
MAX_ELLIPTIC_TOL = 1e-6
ELLIPTIC_ITERATION_FACTOR = 10
DEFAULT_KRUZKOV_LEVELS = (0.1, 0.25, 0.5, 0.75, 0.9)
# dt below this fraction of the remaining interval is merged into the step
TIME_EPSILON = 1e-12

INITIAL_PRESETS = (
    "constant",
    "riemann",
    "smooth-bumps",
    "cosine-perturbation",
    "random-cellwise",
)

# Diagnostics gates
ENTROPY_GATE_FACTOR = 5.0
ENERGY_CUMULATIVE_SLACK = 0.02
LEMMA_TOLERANCE = 1e-12
STEADY_DISSIPATION_TOL = 1e-6
STEADY_SUPPORT_TOL = 1e-6
PLATEAU_LOW = 0.05
PLATEAU_HIGH = 0.95
INTERMEDIATE_FRACTION_GATE = 0.05
LADDER_SLACK = 0.10
RIGIDITY_REFINEMENT_RATIO = 1.3
REFINEMENT_RATIO_RANGE = (1.5, 2.5)
ELLIPTIC_ORDER_RANGE = (1.8, 2.2)
CONSTANT_STATE_TOL = 1e-3
DWELL_DISTANCE = 0.05
DWELL_RATIO_GATE = 10.0
# formation time: first time D drops below this fraction of its peak
FORMATION_DISSIPATION_FRACTION = 0.01
# entropy refinement gate: below this floor the residual is round-off
ENTROPY_NOISE_FLOOR = 1e-10
# E may drop by at most this factor times (dx + dt) * dt per step
ENERGY_DROP_FACTOR = 1.0
# integrated defect along a ladder stays below this multiple of the first rung
DEFECT_GROWTH_FACTOR = 2.0
# max |F| over faces at a steady state
STEADY_FLUX_TOL = 1e-6
# |E - ||S||^2_H1| may not exceed this factor times dx^2 |domain|
ENERGY_NORM_FACTOR = 1.0

# Study names accepted by the CLI
STUDY_NAMES = (
    "vanishing-viscosity",
    "rigidity",
    "long-time",
    "metastability",
    "entropy",
    "kinetic-consistency",
    "elliptic-order",
)

# Snapshot format
SNAPSHOT_HEADER_KEYS = ("grid", "t", "fields", "count")
SNAPSHOT_DIGITS = 17
SNAPSHOT_SUFFIX = ".snap"
SNAPSHOT_FIELDS = ("u", "S")

# Timeseries columns (Kruzkov columns are inserted per level)
TIMESERIES_LEAD_COLUMNS = ("t", "mass", "E", "D", "cumulative_D")
TIMESERIES_TAIL_COLUMNS = ("defect_mass", "bound_violation")
ENTROPY_COLUMN_PREFIX = "max_entropy_residual_k"

# CLI exit codes
EXIT_OK = 0
EXIT_GATE_FAILURE = 1
EXIT_USAGE = 2

ERROR_MESSAGES = {
    "UNKNOWN_PRESET": "Unknown initial-data preset",
    "UNKNOWN_STUDY": "Unknown study name",
    "GRID_MISMATCH": "Fields live on different grids",
    "EMPTY_FILE": "Snapshot file is empty",
    "FILE_TOO_LARGE": "Snapshot file exceeds maximum size",
    "INVALID_FILE_TYPE": "Only snapshot files (.snap or .txt) are supported",
    "MALFORMED_HEADER": "Snapshot header is malformed",
    "COUNT_MISMATCH": "Snapshot value count does not match header",
    "TOO_MANY_CELLS": "Grid exceeds the cell limit of this service",
}

# Logging Constants
LOG_FORMAT = "%(asctime)s - %(name)s - %(levelname)s - %(message)s"
LOG_DATE_FORMAT = "%Y-%m-%d %H:%M:%S"
ROOT_LOGGER_NAME = "ks_lab"
