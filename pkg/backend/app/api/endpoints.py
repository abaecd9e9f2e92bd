"""
API endpoints for the Keller-Segel laboratory.
"""

import math
from functools import lru_cache

from fastapi import APIRouter, Depends, File, HTTPException, Request, UploadFile, status
from slowapi import Limiter
from slowapi.util import get_remote_address

from app.config import Settings, get_settings
from app.constants import ERROR_MESSAGES
from app.exceptions import (
    BoundViolationError,
    EllipticSolverError,
    EntropyGateError,
    SnapshotFormatError,
)
from app.models.kinetic import XiGrid
from app.models.reports import CheckReport, RunSummary
from app.models.sim_config import NumericsSection, SimConfig
from app.services.diagnostics import Diagnostics
from app.services.elliptic import EllipticSolver
from app.services.hyperbolic import FiniteVolumeScheme
from app.services.simulator import Simulator
from app.services.snapshot_io import parse_snapshot
from app.utils.file_validator import FileValidator
from app.utils.logger import setup_logger

logger = setup_logger("api")


# Cached settings for performance
@lru_cache
def get_cached_settings() -> Settings:
    """Get cached settings instance."""
    return get_settings()


def get_file_validator() -> FileValidator:
    """Get file validator instance."""
    return FileValidator(get_cached_settings())


def get_diagnostics() -> Diagnostics:
    """Diagnostics with the default numerics."""
    numerics = NumericsSection()
    return Diagnostics(
        FiniteVolumeScheme(numerics.flux),
        EllipticSolver(numerics.elliptic_tol),
        numerics.face_state,
    )


# Initialize rate limiter
limiter = Limiter(key_func=get_remote_address)

router = APIRouter()


def summarize(config: SimConfig) -> RunSummary:
    """Run a configuration and condense the trajectory."""
    trajectory = Simulator(config).advance()
    first, last = trajectory.records[0], trajectory.records[-1]
    final = trajectory.final.u.values
    return RunSummary(
        backend=trajectory.backend,
        steps=trajectory.steps,
        final_time=last.t,
        mass_drift=abs(last.mass - first.mass),
        u_min=float(final.min()),
        u_max=float(final.max()),
        final_energy=last.energy,
        cumulative_dissipation=last.cumulative_dissipation,
        max_entropy_residual=max(r.max_entropy_residual for r in trajectory.records),
        bound_violation=max((r.bound_violation for r in trajectory.records), default=0.0),
    )


@router.post("/run")
@limiter.limit(f"{get_cached_settings().rate_limit_run}/minute")
def run_simulation(request: Request, config: SimConfig) -> RunSummary:
    """
    Run one simulation and return its summary.

    Args:
        request: FastAPI request object
        config: Simulation configuration (validated by pydantic)

    Returns:
        RunSummary of the trajectory

    Raises:
        HTTPException: 413 for grids above the service limit, 422 when the
            run breaks a gate, 400 for invalid input
    """
    settings = get_cached_settings()
    if math.prod(config.grid.cells) > settings.max_api_cells:
        raise HTTPException(
            status_code=status.HTTP_413_REQUEST_ENTITY_TOO_LARGE,
            detail=f"{ERROR_MESSAGES['TOO_MANY_CELLS']} ({settings.max_api_cells})",
        )

    try:
        summary = summarize(config)
        logger.info("Run via API finished after %d steps", summary.steps)
        return summary

    except (BoundViolationError, EntropyGateError, EllipticSolverError) as e:
        logger.error("Run failed a gate: %s", e)
        raise HTTPException(
            status_code=status.HTTP_422_UNPROCESSABLE_ENTITY, detail=str(e)
        ) from e
    except ValueError as e:
        logger.error("Run rejected: %s", e)
        raise HTTPException(
            status_code=status.HTTP_400_BAD_REQUEST, detail=str(e)
        ) from e
    except Exception as e:
        logger.error("Unexpected error running simulation: %s", e)
        raise HTTPException(
            status_code=status.HTTP_500_INTERNAL_SERVER_ERROR,
            detail="Internal server error",
        ) from e


@router.post("/check")
@limiter.limit(f"{get_cached_settings().rate_limit_check}/minute")
async def check_snapshot(
    request: Request,
    file: UploadFile = File(...),
    file_validator: FileValidator = Depends(get_file_validator),
    diagnostics: Diagnostics = Depends(get_diagnostics),
) -> CheckReport:
    """
    Audit an uploaded snapshot.

    Args:
        file: Snapshot file (.snap or .txt)

    Returns:
        Steady-state residuals, the f (1 - f) bound violation and an entropy audit

    Raises:
        HTTPException: If the file is invalid or cannot be parsed
    """
    try:
        # Step 1: Validate uploaded file
        file_validator.validate_upload_file(file)

        # Step 2: Read and validate content
        content = await file.read()
        file_validator.validate_file_content(content, file.filename)

        # Step 3: Parse and audit
        snapshot = parse_snapshot(content.decode("utf-8"))
        settings = get_cached_settings()
        if snapshot.u.grid.n_cells > settings.max_api_cells:
            raise ValueError(f"{ERROR_MESSAGES['TOO_MANY_CELLS']} ({settings.max_api_cells})")
        numerics = NumericsSection()
        report = diagnostics.audit(
            snapshot.t,
            snapshot.u,
            XiGrid(bins=numerics.xi_bins),
            numerics.kruzkov_levels,
            numerics.cfl,
        )
        logger.info("Checked snapshot %s: passed=%s", file.filename, report.passed)
        return report

    except SnapshotFormatError as e:
        logger.error("Malformed snapshot %s: %s", file.filename, e)
        raise HTTPException(
            status_code=status.HTTP_400_BAD_REQUEST,
            detail=f"Unable to parse snapshot: {str(e)}",
        ) from e
    except UnicodeDecodeError as e:
        logger.error("Snapshot %s is not UTF-8 text: %s", file.filename, e)
        raise HTTPException(
            status_code=status.HTTP_400_BAD_REQUEST, detail="Snapshot must be UTF-8 text"
        ) from e
    except ValueError as e:
        logger.error("Validation error processing snapshot %s: %s", file.filename, e)
        # Check if it's a file size error for special status code
        if "size" in str(e).lower() or "limit" in str(e).lower():
            raise HTTPException(
                status_code=status.HTTP_413_REQUEST_ENTITY_TOO_LARGE, detail=str(e)
            ) from e
        raise HTTPException(
            status_code=status.HTTP_400_BAD_REQUEST, detail=str(e)
        ) from e
    except Exception as e:
        logger.error("Unexpected error checking snapshot %s: %s", file.filename, e)
        raise HTTPException(
            status_code=status.HTTP_500_INTERNAL_SERVER_ERROR,
            detail="Internal server error",
        ) from e


@router.get("/health")
def health_check() -> dict[str, str]:
    """Health check endpoint."""
    settings = get_cached_settings()
    return {
        "status": "healthy",
        "service": settings.app_name,
        "version": settings.app_version,
        "environment": settings.environment,
    }
