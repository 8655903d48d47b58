from __future__ import annotations

import csv
import json
import logging
from dataclasses import dataclass
from pathlib import Path
from typing import Any, Dict, List, Optional, Union

import numpy as np

from src.algorithms import (
    FlowIntegrator,
    band_limited_form,
    build_flow,
    closed_heat_data,
    coclosed_heat_data,
    fourier_mode,
    random_closed_structure,
    random_coclosed_structure,
    uniform_standard,
)
from src.analysis.diagnostics import (
    DiagnosticsRecord,
    HeatRecord,
    compute_heat_record,
    compute_record,
    reference_periods,
)
from src.core import Flow, FlowSpec, FlowState, Trajectory
from src.domain.lattice import Grid, LatticeField, Periods
from src.domain.snapshot import read_snapshot, write_snapshot
from src.errors import ConfigError, PositivityError, SnapshotFormatError
from src.ui.config import RunConfig, parse_config

logger = logging.getLogger(__name__)

TRAJECTORY_CSV = "trajectory.csv"
CHECKPOINT_JSON = "checkpoint.json"
INITIAL_SNAPSHOT = "initial_phi.g2f"
CHECKPOINT_PHI = "checkpoint_phi.g2f"
CHECKPOINT_PSI = "checkpoint_psi.g2f"
FINAL_PHI = "final_phi.g2f"
FINAL_FIELD = "final_field.g2f"
UNIT_WEIGHTS = (1.0, 1.0, 1.0, 1.0)
# +1: volume never decreases, -1: volume never increases
VOLUME_DIRECTION = {"laplacian": 1, "laplacian_deturck": 1, "dirichlet_gradient": -1}


@dataclass
class ExperimentOutcome:
    """
    Result of one configured run.

    Attributes:
        trajectory:     Integrator output (samples, termination reason, timing).
        output_dir:     Directory holding every artifact of the run.
        csv_path:       Diagnostics time series.
        final_snapshot: Snapshot of the last valid state.
        rows_written:   Data rows in the CSV after the run.
        volume_violations: Samples where the volume moved against its monotone direction.
    """
    trajectory: Trajectory
    output_dir: Path
    csv_path: Path
    final_snapshot: Path
    rows_written: int
    volume_violations: int = 0

    @property
    def success(self) -> bool:
        return self.trajectory.success


def build_initial(config: RunConfig, grid: Grid) -> LatticeField:
    """Initial field for a configuration, seeded by its initial seed."""
    initial = config.initial
    rng = np.random.default_rng(config.initial_seed)

    if initial.kind == "from_snapshot":
        field = read_snapshot(initial.path)
        if field.grid != grid:
            raise ConfigError(f"snapshot {initial.path} lives on a different grid than the config")
        return field
    if initial.kind == "uniform_standard":
        return uniform_standard(grid)
    try:
        if initial.kind == "closed_perturbation":
            return random_closed_structure(grid, rng, initial.epsilon)
        if initial.kind == "coclosed_perturbation":
            return random_coclosed_structure(grid, rng, initial.epsilon)
    except PositivityError as exc:
        raise ConfigError(
            f"initial.epsilon = {initial.epsilon} is not admissible "
            f"(max_epsilon = {exc.max_epsilon:.6g})"
        ) from exc
    if initial.kind == "fourier_mode":
        try:
            return fourier_mode(grid, initial.degree, initial.mode, initial.component, initial.amplitude)
        except ValueError as exc:
            raise ConfigError(f"initial.mode: {exc}") from exc
    if initial.kind == "band_limited":
        return band_limited_form(grid, initial.degree, rng, initial.amplitude)
    if initial.kind == "closed_form":
        return closed_heat_data(grid, initial.degree, rng)
    if initial.kind == "coclosed_form":
        return coclosed_heat_data(grid, initial.degree, rng)

    raise ValueError(f"Unknown initial kind: {initial.kind}")


class TrajectoryWriter:
    """Appends one CSV row per sampled state and counts the rows written."""

    def __init__(self, path: Path, header: List[str], rows_written: int = 0) -> None:
        self.path = path
        self.rows_written = rows_written
        if rows_written == 0:
            path.parent.mkdir(parents=True, exist_ok=True)
            with path.open("w", newline="") as f:
                csv.writer(f).writerow(header)

    def write(self, record: Any) -> None:
        with self.path.open("a", newline="") as f:
            csv.writer(f).writerow(record.as_row())
        self.rows_written += 1


def truncate_csv(path: Path, rows: int) -> None:
    """Keep the header and the first `rows` data rows."""
    if not path.exists():
        raise FileNotFoundError(f"Results file not found: {path}")
    lines = path.read_bytes().splitlines(keepends=True)
    if len(lines) < rows + 1:
        raise SnapshotFormatError(f"{path} has {len(lines) - 1} rows, checkpoint expects {rows}")
    path.write_bytes(b"".join(lines[: rows + 1]))


class VolumeMonitor:
    """Logs a warning whenever the volume moves against the direction the flow guarantees."""

    def __init__(self, direction: int, tolerance: float = 1e-12) -> None:
        self.direction = direction
        self.tolerance = tolerance
        self.last: Optional[float] = None
        self.violations = 0

    def check(self, volume: float, t: float) -> bool:
        last, self.last = self.last, volume
        if last is None:
            return False
        if self.direction > 0:
            violated = volume < last * (1.0 - self.tolerance)
        else:
            violated = volume > last * (1.0 + self.tolerance)
        if violated:
            self.violations += 1
            logger.warning(
                "volume %s from %.12g to %.12g at t=%.6g",
                "decreased" if self.direction > 0 else "increased",
                last,
                volume,
                t,
            )
        return violated


def _make_observer(
    flow: Flow,
    reference: Optional[Periods],
    writer: TrajectoryWriter,
    monitor: Optional[VolumeMonitor],
):
    spec = flow.spec
    nu = tuple(spec.parameter("nu")) if spec.kind == "dirichlet_gradient" else UNIT_WEIGHTS

    def observe(state: FlowState):
        if spec.is_heat:
            record = compute_heat_record(state)
        else:
            record = compute_record(state, reference, nu=nu, coflow=spec.is_coflow)
            if monitor is not None:
                monitor.check(record.volume, state.t)
        writer.write(record)
        return record

    return observe


def write_checkpoint(
    state: FlowState,
    config: RunConfig,
    spec: FlowSpec,
    reference: Optional[Periods],
    rows_written: int,
    output_dir: Path,
) -> Path:
    """Snapshot the state and record what a resume needs to continue bit-for-bit."""
    write_snapshot(state.field, output_dir / CHECKPOINT_PHI)
    snapshots: Dict[str, str] = {"initial": INITIAL_SNAPSHOT, "phi": CHECKPOINT_PHI}
    if state.psi is not None:
        write_snapshot(state.psi, output_dir / CHECKPOINT_PSI)
        snapshots["psi"] = CHECKPOINT_PSI

    payload = {
        "version": 1,
        "config": config.to_dict(),
        "kind": spec.kind,
        "parameters": {k: v for k, v in spec.parameters.items()},
        "t": float(state.t).hex(),
        "step": state.step,
        "seed": config.seed,
        "rows_written": rows_written,
        "reference_periods": None,
        "snapshots": snapshots,
    }
    if reference is not None:
        payload["reference_periods"] = {
            "degree": reference.degree,
            "values": [float(v).hex() for v in np.ravel(reference.values)],
        }

    path = output_dir / CHECKPOINT_JSON
    tmp = path.with_suffix(".json.tmp")
    tmp.write_text(json.dumps(payload, indent=2))
    tmp.replace(path)
    logger.debug("checkpoint at step %d, t=%.6g", state.step, state.t)
    return path


def _execute(
    config: RunConfig,
    flow: Flow,
    state: FlowState,
    reference: Optional[Periods],
    output_dir: Path,
    rows_written: int,
) -> ExperimentOutcome:
    spec = flow.spec
    header = list(HeatRecord.HEADER if spec.is_heat else DiagnosticsRecord.HEADER)
    csv_path = output_dir / TRAJECTORY_CSV
    writer = TrajectoryWriter(csv_path, header, rows_written)
    every = config.output.checkpoint_every
    direction = VOLUME_DIRECTION.get(spec.kind)
    monitor = VolumeMonitor(direction) if direction is not None else None

    def on_step(s: FlowState) -> None:
        if every and s.step % every == 0:
            write_checkpoint(s, config, spec, reference, writer.rows_written, output_dir)

    integrator = FlowIntegrator(flow)
    trajectory = integrator.run(
        state,
        config.T,
        sample_every=config.sample_every,
        observer=_make_observer(flow, reference, writer, monitor),
        on_step=on_step,
        record_initial=rows_written == 0,
    )

    final = trajectory.final_state
    write_checkpoint(final, config, spec, reference, writer.rows_written, output_dir)
    final_path = write_snapshot(final.field, output_dir / (FINAL_FIELD if spec.is_heat else FINAL_PHI))
    logger.info(
        "%s: %s at t=%.6g, %d row(s) in %s",
        spec.kind,
        trajectory.reason.value,
        final.t,
        writer.rows_written,
        csv_path,
    )
    return ExperimentOutcome(
        trajectory,
        output_dir,
        csv_path,
        final_path,
        writer.rows_written,
        volume_violations=monitor.violations if monitor is not None else 0,
    )


def run_experiment(config: RunConfig) -> ExperimentOutcome:
    grid = config.grid.build()
    spec = config.flow.spec(grid)
    output_dir = Path(config.output.directory)
    output_dir.mkdir(parents=True, exist_ok=True)

    field = build_initial(config, grid)
    write_snapshot(field, output_dir / INITIAL_SNAPSHOT)
    flow = build_flow(spec, reference=field)
    state = flow.initial_state(field)
    reference = None if spec.is_heat else reference_periods(state, coflow=spec.is_coflow)
    logger.info("running %s on grid %s up to T=%g", spec.kind, grid.extents, config.T)
    return _execute(config, flow, state, reference, output_dir, rows_written=0)


def _read_checkpoint(path: Path) -> Dict[str, Any]:
    if not path.exists():
        raise FileNotFoundError(f"Checkpoint file not found: {path}")
    try:
        payload = json.loads(path.read_text())
    except json.JSONDecodeError as exc:
        raise SnapshotFormatError(f"{path} is not valid JSON: {exc}") from exc
    for key in ("config", "kind", "t", "step", "rows_written", "snapshots"):
        if key not in payload:
            raise SnapshotFormatError(f"checkpoint {path} lacks {key!r}")
    return payload


def resume_experiment(checkpoint_path: Union[str, Path]) -> ExperimentOutcome:
    """
    Continue a run from its checkpoint. The CSV is cut back to the rows the
    checkpoint had seen, so an interrupted run and an uninterrupted one end
    with identical files.
    """
    checkpoint_path = Path(checkpoint_path)
    output_dir = checkpoint_path.parent
    payload = _read_checkpoint(checkpoint_path)
    config = parse_config(payload["config"], base_dir=output_dir)
    grid = config.grid.build()
    spec = config.flow.spec(grid)
    if spec.kind != payload["kind"]:
        raise SnapshotFormatError(f"checkpoint kind {payload['kind']!r} disagrees with its config")

    snapshots = payload["snapshots"]
    initial = read_snapshot(output_dir / snapshots["initial"])
    field = read_snapshot(output_dir / snapshots["phi"])
    psi = read_snapshot(output_dir / snapshots["psi"]) if "psi" in snapshots else None
    if field.grid != grid:
        raise SnapshotFormatError("checkpoint snapshot grid disagrees with its config")

    flow = build_flow(spec, reference=initial)
    state = flow.initial_state(field, t=float.fromhex(payload["t"]), step=int(payload["step"]), psi=psi)
    reference = None
    stored = payload.get("reference_periods")
    if stored is not None:
        values = np.array([float.fromhex(v) for v in stored["values"]])
        reference = Periods(int(stored["degree"]), values)

    rows = int(payload["rows_written"])
    truncate_csv(output_dir / TRAJECTORY_CSV, rows)
    logger.info("resuming %s at step %d, t=%.6g", spec.kind, state.step, state.t)
    return _execute(config, flow, state, reference, output_dir, rows_written=rows)
