"""
Tests for snapshot, timeseries, report and manifest files.
"""

import json

import numpy as np
import pytest

from app.exceptions import SnapshotFormatError
from app.models.fields import CellField
from app.models.grid import build_grid
from app.models.reports import (
    DiagnosticsRecord,
    ManifestEntry,
    RunManifest,
    StudyReport,
)
from app.services.elliptic import EllipticSolver
from app.services.snapshot_io import (
    atomic_write,
    format_snapshot,
    format_timeseries,
    parse_snapshot,
    read_manifest,
    read_snapshot,
    read_timeseries,
    write_manifest,
    write_report,
    write_snapshot,
    write_table,
    write_timeseries,
)


class TestSnapshots:
    """Test the snapshot text format."""

    def setup_method(self):
        """Set up test fixtures."""
        rng = np.random.default_rng(9)
        self.grid = build_grid((1.0, 2.0), (6, 4), "periodic")
        self.u = CellField(self.grid, rng.uniform(size=self.grid.shape), kind="density")
        self.S, _ = EllipticSolver().solve_potential(self.u)

    def test_round_trip_is_bit_exact(self, tmp_path):
        """Test values survive a write and read unchanged."""
        path = write_snapshot(0.125, self.u, self.S, tmp_path / "snap_0001.snap")
        snapshot = read_snapshot(path)
        assert snapshot.t == 0.125
        assert snapshot.u.grid == self.grid
        assert np.array_equal(snapshot.u.values, self.u.values)
        assert np.array_equal(snapshot.S.values, self.S.values)

    def test_header_line(self):
        """Test the header is one JSON object with the expected keys."""
        text = format_snapshot(1.0, self.u, self.S)
        header = json.loads(text.splitlines()[0])
        assert set(header) == {"grid", "t", "fields", "count"}
        assert header["count"] == 24
        assert header["fields"] == ["u", "S"]
        assert len(text.splitlines()) == 25

    def test_truncated_file(self):
        """Test a missing row is a count mismatch."""
        lines = format_snapshot(1.0, self.u, self.S).splitlines()
        with pytest.raises(SnapshotFormatError):
            parse_snapshot("\n".join(lines[:-1]))

    def test_empty_and_malformed(self):
        """Test empty text, bad JSON and missing header keys."""
        with pytest.raises(SnapshotFormatError):
            parse_snapshot("")
        with pytest.raises(SnapshotFormatError):
            parse_snapshot("{not json}\n0.5 0.5\n")
        with pytest.raises(SnapshotFormatError):
            parse_snapshot('{"t": 0}\n')

    def test_non_numeric_row(self):
        """Test rows must hold two numbers."""
        lines = format_snapshot(1.0, self.u, self.S).splitlines()
        lines[3] = "0.5 abc"
        with pytest.raises(SnapshotFormatError):
            parse_snapshot("\n".join(lines))

    def test_density_out_of_range(self):
        """Test stored densities outside [0, 1] are rejected."""
        lines = format_snapshot(1.0, self.u, self.S).splitlines()
        lines[1] = "1.5 0.5"
        with pytest.raises(SnapshotFormatError):
            parse_snapshot("\n".join(lines))

    def test_missing_file(self, tmp_path):
        """Test reading a missing file raises SnapshotFormatError."""
        with pytest.raises(SnapshotFormatError):
            read_snapshot(tmp_path / "nope.snap")


class TestTimeseries:
    """Test the diagnostics CSV."""

    def setup_method(self):
        """Set up test fixtures."""
        self.records = [
            DiagnosticsRecord(
                step=i,
                t=0.1 * i,
                dt=0.1,
                mass=0.5,
                energy=0.2 + 0.01 * i,
                dissipation=0.1,
                cumulative_dissipation=0.01 * i,
                entropy_residuals={"0.25": 0.0, "0.75": 1e-15},
            )
            for i in range(8)
        ]

    def test_round_trip(self, tmp_path):
        """Test every record comes back with its values."""
        path = write_timeseries(self.records, tmp_path / "timeseries.csv")
        rows = read_timeseries(path)
        assert len(rows) == 8
        assert rows[3]["t"] == self.records[3].t
        assert rows[3]["E"] == self.records[3].energy
        assert rows[7]["cumulative_D"] == self.records[7].cumulative_dissipation
        assert rows[0]["max_entropy_residual_k0.75"] == 1e-15

    def test_column_order(self):
        """Test the header lists lead, entropy and tail columns in order."""
        header = format_timeseries(self.records).splitlines()[0].split(",")
        assert header == [
            "t",
            "mass",
            "E",
            "D",
            "cumulative_D",
            "max_entropy_residual_k0.25",
            "max_entropy_residual_k0.75",
            "defect_mass",
            "bound_violation",
        ]

    def test_thinning_keeps_last_row(self):
        """Test every n-th row is kept together with the final one."""
        lines = format_timeseries(self.records, every=3).splitlines()
        times = [float(line.split(",")[0]) for line in lines[1:]]
        assert times == [self.records[i].t for i in (0, 3, 6, 7)]

    def test_missing_columns(self, tmp_path):
        """Test CSVs without the expected columns are rejected."""
        path = tmp_path / "bad.csv"
        path.write_text("t,mass\n0,1\n", encoding="utf-8")
        with pytest.raises(SnapshotFormatError):
            read_timeseries(path)


class TestArtifacts:
    """Test atomic writes, reports, tables and manifests."""

    def test_atomic_write_leaves_no_temp_files(self, tmp_path):
        """Test only the target remains after a write."""
        atomic_write(tmp_path / "out" / "file.txt", "hello\n")
        atomic_write(tmp_path / "out" / "file.txt", "again\n")
        files = list((tmp_path / "out").iterdir())
        assert [f.name for f in files] == ["file.txt"]
        assert files[0].read_text(encoding="utf-8") == "again\n"

    def test_report_includes_pass_flag(self, tmp_path):
        """Test reports serialize gates and the overall verdict."""
        report = StudyReport(name="rigidity", config_hash="abc", gates={"a": True, "b": False})
        data = json.loads(write_report(report, tmp_path / "report.json").read_text())
        assert data["passed"] is False
        assert data["gates"] == {"a": True, "b": False}
        assert report.failed_gates == ["b"]

    def test_table_columns(self, tmp_path):
        """Test table columns appear in first-seen order."""
        path = write_table([{"epsilon": 0.01, "rung": 1}, {"epsilon": 0.005, "extra": "x"}], tmp_path / "t.csv")
        lines = path.read_text(encoding="utf-8").splitlines()
        assert lines[0] == "epsilon,rung,extra"
        assert lines[2] == "0.0050000000000000001,,x"

    def test_manifest_round_trip(self, tmp_path):
        """Test manifests read back equal."""
        grid = build_grid((1.0,), (8,))
        manifest = RunManifest(
            version="1.0.0",
            config={"grid": {"cells": [8]}},
            config_hash="0" * 64,
            grid=grid.spec,
            files=[ManifestEntry(path="timeseries.csv", role="timeseries")],
        )
        path = write_manifest(manifest, tmp_path / "manifest.json")
        assert read_manifest(path) == manifest

    def test_bad_manifest(self, tmp_path):
        """Test invalid manifests raise SnapshotFormatError."""
        path = tmp_path / "manifest.json"
        path.write_text("{}", encoding="utf-8")
        with pytest.raises(SnapshotFormatError):
            read_manifest(path)
