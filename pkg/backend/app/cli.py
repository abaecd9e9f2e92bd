"""
Command line entry point: run, study, check and version.

Exit codes: 0 on success, 1 when a gate fails, 2 on usage or configuration errors.
"""

import argparse
import sys
from collections.abc import Sequence
from pathlib import Path

from app.config import get_settings
from app.constants import (
    EXIT_GATE_FAILURE,
    EXIT_OK,
    EXIT_USAGE,
    SNAPSHOT_SUFFIX,
    STUDY_NAMES,
)
from app.exceptions import (
    BoundViolationError,
    EllipticSolverError,
    EntropyGateError,
    LabError,
)
from app.models.kinetic import XiGrid
from app.models.reports import RunManifest
from app.models.sim_config import NumericsSection, SimConfig
from app.services.config_parser import config_hash, load_config, serialize_config
from app.services.diagnostics import Diagnostics
from app.services.elliptic import EllipticSolver
from app.services.experiments import StudyRunner
from app.services.hyperbolic import FiniteVolumeScheme
from app.services.simulator import Simulator
from app.services.snapshot_io import (
    atomic_write,
    read_snapshot,
    write_manifest,
    write_report,
    write_snapshot,
    write_timeseries,
)
from app.utils.logger import set_quiet, setup_logger

logger = setup_logger("cli")


def build_parser() -> argparse.ArgumentParser:
    parser = argparse.ArgumentParser(
        prog="ks-lab",
        description="Hyperbolic Keller-Segel model with quorum sensing: runs, studies and audits.",
    )
    common = argparse.ArgumentParser(add_help=False)
    common.add_argument("--config", type=Path, help="Configuration file (TOML or JSON)")
    common.add_argument("--out", type=Path, help="Output directory")
    common.add_argument("--quiet", action="store_true", help="Only log warnings and errors")

    sub = parser.add_subparsers(dest="command", required=True)
    sub.add_parser("run", parents=[common], help="Run one simulation")
    study = sub.add_parser("study", parents=[common], help="Run a scripted study")
    study.add_argument("name", choices=STUDY_NAMES)
    study.add_argument("--workers", type=int, default=None, help="Parallel runs per study")
    check = sub.add_parser("check", parents=[common], help="Audit a stored snapshot")
    check.add_argument("snapshot", type=Path)
    sub.add_parser("version", help="Print the version")
    return parser


def _manifest(config: SimConfig) -> RunManifest:
    return RunManifest(
        version=get_settings().app_version,
        config=config.model_dump(mode="json"),
        config_hash=config_hash(config),
        grid=config.grid.to_spec(),
    )


class _UsageError(Exception):
    """Missing arguments that argparse cannot express."""


def _require_config(args: argparse.Namespace) -> SimConfig:
    if args.config is None:
        raise _UsageError(f"{args.command} needs --config")
    return load_config(args.config)


def cmd_run(args: argparse.Namespace) -> int:
    config = _require_config(args)
    out = args.out or Path(get_settings().output_dir)
    trajectory = Simulator(config).advance()

    manifest = _manifest(config)
    path = atomic_write(out / "config.json", serialize_config(config) + "\n")
    manifest.add(str(path.relative_to(out)), "config")
    if config.output.write_snapshots:
        for index, snap in enumerate(trajectory.snapshots):
            path = write_snapshot(
                snap.t, snap.u, snap.S, out / "snapshots" / f"snap_{index:04d}{SNAPSHOT_SUFFIX}"
            )
            manifest.add(str(path.relative_to(out)), "snapshot")
    path = write_timeseries(
        trajectory.records, out / "timeseries.csv", config.output.diagnostics_every
    )
    manifest.add(str(path.relative_to(out)), "timeseries")
    write_manifest(manifest, out / "manifest.json")

    last = trajectory.records[-1]
    print(
        f"run complete: {trajectory.steps} steps to t={last.t:g}, "
        f"E={last.energy:.6g}, cumulative D={last.cumulative_dissipation:.6g}"
    )
    return EXIT_OK


def cmd_study(args: argparse.Namespace) -> int:
    config = _require_config(args)
    out = args.out or Path(get_settings().output_dir)
    workers = args.workers or config.experiment.workers or get_settings().study_workers
    report = StudyRunner(config, out, workers).run(args.name)

    manifest = _manifest(config)
    path = atomic_write(out / "config.json", serialize_config(config) + "\n")
    manifest.add(str(path.relative_to(out)), "config")
    for artifact in report.artifacts:
        role = "table" if artifact.endswith("table.csv") else "timeseries"
        manifest.add(str(Path(artifact).relative_to(out)), role)
    path = write_report(report, out / args.name / "report.json")
    report.artifacts.append(str(path))
    manifest.add(str(path.relative_to(out)), "report")
    write_manifest(manifest, out / "manifest.json")

    status = "passed" if report.passed else f"FAILED ({', '.join(report.failed_gates)})"
    print(f"study {args.name}: {status}")
    return EXIT_OK if report.passed else EXIT_GATE_FAILURE


def cmd_check(args: argparse.Namespace) -> int:
    config = load_config(args.config) if args.config is not None else None
    numerics = config.numerics if config is not None else NumericsSection()
    epsilon = config.physics.epsilon if config is not None else 0.0

    snapshot = read_snapshot(args.snapshot)
    solver = EllipticSolver(numerics.elliptic_tol)
    diagnostics = Diagnostics(FiniteVolumeScheme(numerics.flux), solver, numerics.face_state)
    report = diagnostics.audit(
        snapshot.t,
        snapshot.u,
        XiGrid(bins=numerics.xi_bins),
        numerics.kruzkov_levels,
        numerics.cfl,
        epsilon,
    )
    text = report.model_dump_json(indent=2)
    if args.out is not None:
        atomic_write(args.out / "check.json", text + "\n")
    print(text)
    logger.debug("Checked snapshot on grid %s", snapshot.u.grid.cells)
    return EXIT_OK if report.passed else EXIT_GATE_FAILURE


def cmd_version(_args: argparse.Namespace) -> int:
    settings = get_settings()
    print(f"{settings.app_name} {settings.app_version}")
    return EXIT_OK


COMMANDS = {
    "run": cmd_run,
    "study": cmd_study,
    "check": cmd_check,
    "version": cmd_version,
}


def main(argv: Sequence[str] | None = None) -> int:
    """Parse arguments, dispatch and map failures to exit codes."""
    parser = build_parser()
    try:
        args = parser.parse_args(argv)
    except SystemExit as e:
        # argparse already printed usage; --help exits with 0
        return EXIT_OK if e.code in (0, None) else EXIT_USAGE

    if getattr(args, "quiet", False):
        set_quiet(True)
    try:
        return COMMANDS[args.command](args)
    except _UsageError as e:
        print(f"error: {e}", file=sys.stderr)
        return EXIT_USAGE
    except (BoundViolationError, EntropyGateError, EllipticSolverError) as e:
        logger.error("Run failed: %s", e)
        print(f"gate failure: {e}", file=sys.stderr)
        return EXIT_GATE_FAILURE
    except (LabError, ValueError) as e:
        print(f"error: {e}", file=sys.stderr)
        return EXIT_USAGE
    except OSError as e:
        print(f"error: {e}", file=sys.stderr)
        return EXIT_USAGE
    finally:
        if getattr(args, "quiet", False):
            set_quiet(False)


if __name__ == "__main__":
    sys.exit(main())
