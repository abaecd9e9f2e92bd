"""
Text artifacts: snapshots, diagnostics timeseries, study reports, tables and manifests.

Every writer goes through a temporary file in the target directory followed
by an atomic rename, so a failed run never leaves a partial file behind.
"""

import csv
import io
import json
import os
import tempfile
from collections.abc import Iterable, Sequence
from pathlib import Path

import numpy as np
from pydantic import ValidationError

from app.constants import (
    ENTROPY_COLUMN_PREFIX,
    ERROR_MESSAGES,
    SNAPSHOT_DIGITS,
    SNAPSHOT_FIELDS,
    SNAPSHOT_HEADER_KEYS,
    TIMESERIES_LEAD_COLUMNS,
    TIMESERIES_TAIL_COLUMNS,
)
from app.exceptions import FieldBoundsError, GridError, SnapshotFormatError
from app.models.fields import CellField
from app.models.grid import GridSpec, grid_from_spec
from app.models.reports import DiagnosticsRecord, RunManifest, Snapshot, StudyReport
from app.utils.logger import setup_logger

logger = setup_logger("snapshot_io")


def _number(x: float) -> str:
    return format(float(x), f".{SNAPSHOT_DIGITS}g")


def atomic_write(path: str | Path, text: str) -> Path:
    """Write text to path via a temporary sibling file and os.replace."""
    target = Path(path)
    target.parent.mkdir(parents=True, exist_ok=True)
    with tempfile.NamedTemporaryFile(
        "w", encoding="utf-8", dir=target.parent, prefix=f".{target.name}.", delete=False
    ) as temp_file:
        temp_file.write(text)
        temp_file.flush()
        temp_path = temp_file.name
    try:
        os.replace(temp_path, target)
    except OSError:
        try:
            os.unlink(temp_path)
        except OSError as cleanup_error:
            logger.warning("Failed to cleanup temp file %s: %s", temp_path, cleanup_error)
        raise
    return target


# Snapshots


def format_snapshot(t: float, u: CellField, S: CellField) -> str:
    """
    Header line (JSON with keys grid, t, fields, count) followed by one row
    per cell in C order holding u and S at 17 significant digits.
    """
    if u.grid != S.grid:
        raise GridError(ERROR_MESSAGES["GRID_MISMATCH"])
    header = {
        "grid": u.grid.spec.model_dump(mode="json"),
        "t": float(t),
        "fields": list(SNAPSHOT_FIELDS),
        "count": u.grid.n_cells,
    }
    lines = [json.dumps(header, sort_keys=True)]
    for a, b in zip(u.values.ravel(), S.values.ravel(), strict=True):
        lines.append(f"{_number(a)} {_number(b)}")
    return "\n".join(lines) + "\n"


def parse_snapshot(text: str) -> Snapshot:
    """
    Inverse of format_snapshot.

    Raises:
        SnapshotFormatError: Malformed header or a value count that does not
            match the header
    """
    lines = text.splitlines()
    if not lines or not lines[0].strip():
        raise SnapshotFormatError(ERROR_MESSAGES["EMPTY_FILE"])
    try:
        header = json.loads(lines[0])
    except json.JSONDecodeError as e:
        raise SnapshotFormatError(f"{ERROR_MESSAGES['MALFORMED_HEADER']}: {e}") from e
    if not isinstance(header, dict) or set(header) != set(SNAPSHOT_HEADER_KEYS):
        raise SnapshotFormatError(
            f"{ERROR_MESSAGES['MALFORMED_HEADER']}: expected keys {sorted(SNAPSHOT_HEADER_KEYS)}"
        )
    if list(header["fields"]) != list(SNAPSHOT_FIELDS):
        raise SnapshotFormatError(
            f"{ERROR_MESSAGES['MALFORMED_HEADER']}: fields must be {list(SNAPSHOT_FIELDS)}"
        )
    try:
        spec = GridSpec.model_validate(header["grid"])
        grid = grid_from_spec(spec)
        t = float(header["t"])
        count = int(header["count"])
    except (ValidationError, GridError, TypeError, ValueError) as e:
        raise SnapshotFormatError(f"{ERROR_MESSAGES['MALFORMED_HEADER']}: {e}") from e

    rows = [line for line in lines[1:] if line.strip()]
    if count != grid.n_cells or len(rows) != count:
        raise SnapshotFormatError(
            f"{ERROR_MESSAGES['COUNT_MISMATCH']}: header {count}, grid {grid.n_cells}, "
            f"rows {len(rows)}"
        )
    try:
        values = np.array([[float(x) for x in row.split()] for row in rows])
    except ValueError as e:
        raise SnapshotFormatError(f"Snapshot row is not numeric: {e}") from e
    if values.shape != (count, len(SNAPSHOT_FIELDS)):
        raise SnapshotFormatError(
            f"{ERROR_MESSAGES['COUNT_MISMATCH']}: expected {len(SNAPSHOT_FIELDS)} values per row"
        )
    try:
        u = CellField(grid, values[:, 0].reshape(grid.shape), kind="density")
        S = CellField(grid, values[:, 1].reshape(grid.shape), kind="potential")
    except FieldBoundsError as e:
        raise SnapshotFormatError(f"Snapshot values out of range: {e}") from e
    return Snapshot(t, u, S)


def write_snapshot(t: float, u: CellField, S: CellField, path: str | Path) -> Path:
    out = atomic_write(path, format_snapshot(t, u, S))
    logger.debug("Wrote snapshot t=%s to %s", t, out)
    return out


def read_snapshot(path: str | Path) -> Snapshot:
    """Read a snapshot file; I/O errors surface as SnapshotFormatError."""
    try:
        text = Path(path).read_text(encoding="utf-8")
    except (OSError, UnicodeDecodeError) as e:
        logger.error("Cannot read snapshot %s: %s", path, e)
        raise SnapshotFormatError(f"Cannot read snapshot {path}: {e}") from e
    return parse_snapshot(text)


# Timeseries


def timeseries_columns(levels: Sequence[str]) -> list[str]:
    return (
        list(TIMESERIES_LEAD_COLUMNS)
        + [f"{ENTROPY_COLUMN_PREFIX}{key}" for key in levels]
        + list(TIMESERIES_TAIL_COLUMNS)
    )


def format_timeseries(records: Iterable[DiagnosticsRecord], every: int = 1) -> str:
    """
    CSV with one row per kept record (every `every`-th row plus the last one).
    """
    rows = list(records)
    levels = list(rows[0].entropy_residuals) if rows else []
    buffer = io.StringIO()
    writer = csv.writer(buffer, lineterminator="\n")
    writer.writerow(timeseries_columns(levels))
    for index, record in enumerate(rows):
        if index % every and index != len(rows) - 1:
            continue
        writer.writerow(
            [
                _number(record.t),
                _number(record.mass),
                _number(record.energy),
                _number(record.dissipation),
                _number(record.cumulative_dissipation),
                *(_number(record.entropy_residuals.get(key, 0.0)) for key in levels),
                _number(record.defect_mass),
                _number(record.bound_violation),
            ]
        )
    return buffer.getvalue()


def write_timeseries(
    records: Iterable[DiagnosticsRecord], path: str | Path, every: int = 1
) -> Path:
    return atomic_write(path, format_timeseries(records, every))


def read_timeseries(path: str | Path) -> list[dict[str, float]]:
    """
    Rows of a timeseries CSV as column -> value.

    Raises:
        SnapshotFormatError: Missing file, missing columns or non-numeric cells
    """
    try:
        text = Path(path).read_text(encoding="utf-8")
    except OSError as e:
        raise SnapshotFormatError(f"Cannot read timeseries {path}: {e}") from e
    reader = csv.DictReader(io.StringIO(text))
    fields = reader.fieldnames or []
    missing = [c for c in TIMESERIES_LEAD_COLUMNS + TIMESERIES_TAIL_COLUMNS if c not in fields]
    if missing:
        raise SnapshotFormatError(f"Timeseries {path} lacks columns {missing}")
    try:
        return [{key: float(value) for key, value in row.items()} for row in reader]
    except (TypeError, ValueError) as e:
        raise SnapshotFormatError(f"Timeseries {path} has a non-numeric cell: {e}") from e


# Reports and manifests


def write_table(rows: Sequence[dict[str, float | int | str]], path: str | Path) -> Path:
    """CSV of study table rows; columns in first-seen order."""
    columns: list[str] = []
    for row in rows:
        columns += [key for key in row if key not in columns]
    buffer = io.StringIO()
    writer = csv.DictWriter(buffer, fieldnames=columns, lineterminator="\n")
    writer.writeheader()
    for row in rows:
        writer.writerow(
            {key: _number(v) if isinstance(v, float) else v for key, v in row.items()}
        )
    return atomic_write(path, buffer.getvalue())


def write_report(report: StudyReport, path: str | Path) -> Path:
    """StudyReport as indented JSON, including the pass flag."""
    data = report.model_dump(mode="json")
    data["passed"] = report.passed
    return atomic_write(path, json.dumps(data, indent=2, sort_keys=True) + "\n")


def write_manifest(manifest: RunManifest, path: str | Path) -> Path:
    return atomic_write(path, manifest.model_dump_json(indent=2) + "\n")


def read_manifest(path: str | Path) -> RunManifest:
    try:
        return RunManifest.model_validate_json(Path(path).read_text(encoding="utf-8"))
    except (OSError, ValidationError) as e:
        raise SnapshotFormatError(f"Cannot read manifest {path}: {e}") from e
