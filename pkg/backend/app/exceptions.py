"""
Custom exception classes for the Keller-Segel laboratory.
"""


class LabError(Exception):
    """Base class for every error raised by the laboratory."""


class ConfigurationError(LabError, ValueError):
    """Raised when a configuration is malformed or out of range."""

    def __init__(self, key: str, message: str):
        self.key = key
        super().__init__(f"{key}: {message}")


class GridError(LabError, ValueError):
    """Raised for invalid grid specifications or mismatched fields."""


class FieldBoundsError(LabError, ValueError):
    """Raised when a density, potential or kinetic value leaves [0, 1]."""


class CFLViolationError(LabError, ValueError):
    """Raised when a time step exceeds the stability limit."""


class MonotonicityError(LabError, ValueError):
    """Raised when a kinetic field is not nonincreasing in xi."""


class BoxSizeError(LabError, ValueError):
    """Raised when averaging boxes do not divide the grid or step counts."""


class EllipticSolverError(LabError, RuntimeError):
    """Raised when the screened Poisson solve does not converge."""


class BoundViolationError(LabError, RuntimeError):
    """Raised when a time step breaks the maximum principle."""


class SnapshotFormatError(LabError, ValueError):
    """Raised when a snapshot or timeseries file cannot be parsed."""


class EntropyGateError(LabError, RuntimeError):
    """Raised when the strict cellwise entropy gate fails during a run."""
