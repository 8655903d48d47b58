from __future__ import annotations

import argparse
import logging
import sys
from contextlib import nullcontext
from pathlib import Path
from typing import List, Optional

import scipy.fft as sp_fft

from src.analysis.diagnostics import (
    compute_heat_record,
    compute_record,
    dirichlet_C,
    reference_periods,
    total_scalar_curvature,
)
from src.analysis.experiments import ExperimentOutcome, resume_experiment, run_experiment
from src.analysis.summary import load_trajectory, print_summary
from src.analysis.validation import run_validation
from src.core import FlowState, TerminationReason
from src.domain.g2_fields import dirichlet_D, frame_field, psi_field, torsion_field, torsion_l2_norms
from src.domain.g2_pointwise import torsion_type_residuals
from src.domain.snapshot import read_snapshot
from src.errors import (
    ConditioningError,
    ConfigError,
    ConvergenceError,
    DofBudgetError,
    PositivityError,
    SnapshotFormatError,
)
from src.ui.config import apply_environment, load_config, thread_count

logger = logging.getLogger(__name__)

EXIT_OK = 0
EXIT_VALIDATION = 1
EXIT_CONFIG = 2
EXIT_POSITIVITY = 3
EXIT_DIVERGED = 4
EXIT_CFL_COLLAPSE = 5
EXIT_IO = 6

REASON_CODES = {
    TerminationReason.REACHED_T: EXIT_OK,
    TerminationReason.POSITIVITY_LOST: EXIT_POSITIVITY,
    TerminationReason.DIVERGED: EXIT_DIVERGED,
    TerminationReason.CFL_COLLAPSE: EXIT_CFL_COLLAPSE,
}


def cmd_validate(corrupt_star_degree: Optional[int] = None) -> int:
    report = run_validation(corrupt_star_degree=corrupt_star_degree)
    for line in report.lines():
        print(line)
    if report.passed:
        print("all identities hold")
        return EXIT_OK
    print(f"failed: {', '.join(report.failures)}")
    return EXIT_VALIDATION


def _report_outcome(outcome: ExperimentOutcome) -> int:
    trajectory = outcome.trajectory
    print("-" * 40)
    print(f"Termination: {trajectory.reason.value}")
    if trajectory.message:
        print(f"Detail: {trajectory.message}")
    print(f"Final time: {trajectory.final_time:.6g} after {trajectory.steps} step(s)")
    print(f"Runtime: {trajectory.runtime:.4f} s")
    print(f"Output: {outcome.output_dir}")
    if outcome.rows_written:
        print_summary(load_trajectory(outcome.csv_path))
    if outcome.volume_violations:
        print(f"Volume monotonicity violated at {outcome.volume_violations} sample(s)")
    print("-" * 40)
    return REASON_CODES[trajectory.reason]


def cmd_run(config_path: Path) -> int:
    config = apply_environment(load_config(config_path))
    return _report_outcome(run_experiment(config))


def cmd_resume(checkpoint_path: Path) -> int:
    return _report_outcome(resume_experiment(checkpoint_path))


def cmd_diagnose(snapshot_path: Path) -> int:
    field = read_snapshot(snapshot_path)
    print(f"Snapshot: {snapshot_path}")
    print(f"Grid: {field.grid.extents} ({field.grid.scheme}), degree {field.degree}")

    if field.degree != 3:
        record = compute_heat_record(FlowState(t=0.0, field=field))
        for name, value in zip(record.HEADER, record.as_row()):
            print(f"{name:<28} {value}")
        return EXIT_OK

    frame = frame_field(field)
    psi = psi_field(field, frame)
    state = FlowState(t=0.0, field=field, frame=frame, psi=psi)
    record = compute_record(state, reference_periods(state))
    for name, value in zip(record.HEADER, record.as_row()):
        print(f"{name:<28} {value}")

    tf = torsion_field(field, frame, psi)
    residuals = torsion_type_residuals(frame, tf.torsion)
    print(f"{'tau2 ∧ psi':<28} {residuals[0]:.3e}")
    print(f"{'tau3 ∧ phi':<28} {residuals[1]:.3e}")
    print(f"{'tau3 ∧ psi':<28} {residuals[2]:.3e}")

    oracle = total_scalar_curvature(field, frame)
    from_torsion = -0.5 * torsion_l2_norms(field, frame, tf.torsion)[2] ** 2
    energy_gap = dirichlet_D(field, frame, psi) - dirichlet_C(field, frame)
    print("Scalar curvature (integrated):")
    print(f"  {'metric oracle':<26} {oracle:.12g}")
    print(f"  {'-1/2 |tau2|^2':<26} {from_torsion:.12g}  (closed structures)")
    print(f"  {'D - C':<26} {energy_gap:.12g}")
    print(
        f"  deviations: oracle vs torsion {abs(oracle - from_torsion):.3e}, "
        f"oracle vs D - C {abs(oracle - energy_gap):.3e}, "
        f"torsion vs D - C {abs(from_torsion - energy_gap):.3e}"
    )
    return EXIT_OK


def build_parser() -> argparse.ArgumentParser:
    parser = argparse.ArgumentParser(prog="g2lab", description="G2 structure flows on periodic lattices")
    parser.add_argument("-v", "--verbose", action="store_true", help="Debug logging")
    sub = parser.add_subparsers(dest="command", required=True)

    validate = sub.add_parser("validate", help="Run the pointwise identity suite")
    validate.add_argument(
        "--corrupt-star-degree",
        type=int,
        default=None,
        choices=range(8),
        metavar="K",
        help="Flip the degree-K Hodge star sign table (negative test)",
    )

    run = sub.add_parser("run", help="Run a configured flow")
    run.add_argument("config", type=Path, help="JSON run configuration")
    run.add_argument("--threads", type=int, default=None, help="FFT worker threads")

    resume = sub.add_parser("resume", help="Continue a run from its checkpoint")
    resume.add_argument("checkpoint", type=Path, help="checkpoint.json of an earlier run")
    resume.add_argument("--threads", type=int, default=None, help="FFT worker threads")

    diagnose = sub.add_parser("diagnose", help="Diagnostics of a single snapshot")
    diagnose.add_argument("snapshot", type=Path, help="Snapshot file (.g2f)")
    return parser


def _dispatch(args: argparse.Namespace) -> int:
    if args.command == "validate":
        return cmd_validate(args.corrupt_star_degree)
    if args.command == "diagnose":
        return cmd_diagnose(args.snapshot)

    workers = thread_count(args.threads)
    with sp_fft.set_workers(workers) if workers is not None else nullcontext():
        if args.command == "run":
            return cmd_run(args.config)
        if args.command == "resume":
            return cmd_resume(args.checkpoint)

    raise ValueError(f"Unknown command: {args.command}")


def main(argv: Optional[List[str]] = None) -> int:
    """
    Command line entry point. Returns the exit code:
    0 success, 1 validation failure, 2 configuration error, 3 positivity
    lost, 4 diverged, 5 CFL collapse, 6 file or format error.
    """
    parser = build_parser()
    args = parser.parse_args(argv)
    logging.basicConfig(
        level=logging.DEBUG if args.verbose else logging.INFO,
        format="%(asctime)s %(levelname)s %(name)s: %(message)s",
    )
    try:
        return _dispatch(args)
    except SnapshotFormatError as exc:
        print(f"format error: {exc}", file=sys.stderr)
        return EXIT_IO
    except (ConfigError, DofBudgetError) as exc:
        print(f"configuration error: {exc}", file=sys.stderr)
        return EXIT_CONFIG
    except (PositivityError, ConditioningError, ConvergenceError) as exc:
        print(f"not a positive structure: {exc}", file=sys.stderr)
        return EXIT_POSITIVITY
    except OSError as exc:
        print(f"file error: {exc}", file=sys.stderr)
        return EXIT_IO


if __name__ == "__main__":
    sys.exit(main())
