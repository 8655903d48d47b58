import json
import logging

import numpy as np
import pytest

import src.analysis.experiments as experiments
from src.algorithms.initial import uniform_standard
from src.analysis.experiments import (
    CHECKPOINT_JSON,
    FINAL_PHI,
    TRAJECTORY_CSV,
    VolumeMonitor,
    resume_experiment,
    run_experiment,
)
from src.analysis.summary import is_nonincreasing, load_trajectory, summarize
from src.domain.lattice import Grid, LatticeField
from src.domain.snapshot import write_snapshot
from src.errors import ConfigError
from src.ui.cli import (
    EXIT_CFL_COLLAPSE,
    EXIT_CONFIG,
    EXIT_DIVERGED,
    EXIT_IO,
    EXIT_OK,
    EXIT_POSITIVITY,
    EXIT_VALIDATION,
    main,
)
from src.ui.config import apply_environment, load_config, parse_config, thread_count
from tests.conftest import TWO_PI


def _config(directory, **overrides):
    data = {
        "version": 1,
        "seed": 5,
        "grid": {"extents": [8, 1, 1, 1, 1, 1, 1], "length": TWO_PI},
        "initial": {"kind": "closed_perturbation", "epsilon": 0.05},
        "flow": {"kind": "laplacian", "stepper": "rk4", "dt": 0.01},
        "T": 0.1,
        "sample_every": 2,
        "output": {"directory": str(directory), "checkpoint_every": 2},
    }
    data.update(overrides)
    return data


def _heat_config(directory, **flow):
    settings = {"kind": "heat", "stepper": "rk4", "dt": 0.01}
    settings.update(flow)
    return _config(
        directory,
        grid={"extents": [16, 1, 1, 1, 1, 1, 1], "length": TWO_PI},
        initial={"kind": "fourier_mode", "mode": [1], "degree": 1},
        flow=settings,
        T=0.05,
        sample_every=1,
    )


def _write(tmp_path, data, name="run.json"):
    path = tmp_path / name
    path.write_text(json.dumps(data))
    return path


@pytest.fixture(autouse=True)
def clean_environment(monkeypatch):
    monkeypatch.delenv("G2LAB_OUTPUT_DIR", raising=False)
    monkeypatch.delenv("G2LAB_THREADS", raising=False)


def test_parse_config_fills_defaults(tmp_path):
    config = parse_config(_config(tmp_path))
    assert config.grid.spacings[0] == pytest.approx(TWO_PI / 8)
    assert config.grid.spacings[1] == pytest.approx(TWO_PI)
    assert config.grid.scheme == "spectral"
    assert config.initial_seed == 5
    assert config.flow.adaptive is None
    assert config.to_dict()["grid"]["extents"] == [8, 1, 1, 1, 1, 1, 1]


def test_lambda1_auto_uses_first_eigenvalue(tmp_path):
    data = _heat_config(tmp_path, kind="heat_modified", parameters={"lambda1": "auto"})
    data["initial"]["degree"] = 0
    config = parse_config(data)
    spec = config.flow.spec(config.grid.build())
    assert spec.parameter("lambda1") == pytest.approx(1.0)


@pytest.mark.parametrize(
    "change",
    [
        lambda d: d.pop("version"),
        lambda d: d.update(version=2),
        lambda d: d.update(colour="red"),
        lambda d: d["grid"].update(spacings=[1.0] * 7),
        lambda d: d["grid"].update(extents=[3, 1, 1, 1, 1, 1, 1]),
        lambda d: d["initial"].update(kind="fourier_mode"),
        lambda d: d["initial"].pop("epsilon"),
        lambda d: d["initial"].update(kind="from_snapshot", path="missing.g2f"),
        lambda d: d["flow"].update(kind="ricci"),
        lambda d: d["flow"].pop("dt"),
        lambda d: d["flow"].update(adaptive=2.0),
        lambda d: d.update(sample_every=0),
        lambda d: d.update(T=-1.0),
        lambda d: d["output"].update(checkpoint_every=-1),
    ],
)
def test_invalid_configs_are_rejected(tmp_path, change):
    data = _config(tmp_path)
    change(data)
    with pytest.raises(ConfigError):
        parse_config(data, base_dir=tmp_path)


def test_modified_heat_needs_functions(tmp_path):
    data = _heat_config(tmp_path, kind="heat_modified", parameters={"lambda1": 1.0})
    with pytest.raises(ConfigError):
        parse_config(data)


def test_load_config_errors(tmp_path):
    with pytest.raises(FileNotFoundError):
        load_config(tmp_path / "absent.json")
    broken = tmp_path / "broken.json"
    broken.write_text("{not json")
    with pytest.raises(ConfigError):
        load_config(broken)


def test_environment_overrides(tmp_path):
    config = parse_config(_config(tmp_path / "a"))
    moved = apply_environment(config, {"G2LAB_OUTPUT_DIR": str(tmp_path / "b")})
    assert moved.output.directory == str(tmp_path / "b")
    assert moved.output.checkpoint_every == 2
    assert apply_environment(config, {}) is config

    assert thread_count(3, {"G2LAB_THREADS": "8"}) == 3
    assert thread_count(None, {"G2LAB_THREADS": "8"}) == 8
    assert thread_count(None, {}) is None
    with pytest.raises(ConfigError):
        thread_count(None, {"G2LAB_THREADS": "many"})
    with pytest.raises(ConfigError):
        thread_count(0, {})


def test_run_writes_trajectory_and_snapshots(tmp_path):
    outcome = run_experiment(parse_config(_config(tmp_path / "out")))
    assert outcome.success
    df = load_trajectory(outcome.csv_path)
    assert list(df["step"]) == [0, 2, 4, 6, 8, 10]
    assert outcome.rows_written == 6
    assert (tmp_path / "out" / FINAL_PHI).exists()
    assert (tmp_path / "out" / CHECKPOINT_JSON).exists()
    summary = summarize(df)
    assert summary["volume_nondecreasing"]
    assert summary["max_period_drift"] < 1e-12
    assert summary["max_d_residual"] < 1e-10


class _Interrupted(Exception):
    pass


def test_resume_reproduces_an_uninterrupted_run(tmp_path, monkeypatch):
    straight = run_experiment(parse_config(_config(tmp_path / "straight")))

    original = experiments.write_checkpoint

    def interrupting(state, *args, **kwargs):
        if state.step == 6:
            raise _Interrupted()
        return original(state, *args, **kwargs)

    monkeypatch.setattr(experiments, "write_checkpoint", interrupting)
    with pytest.raises(_Interrupted):
        run_experiment(parse_config(_config(tmp_path / "resumed")))
    monkeypatch.setattr(experiments, "write_checkpoint", original)

    checkpoint = json.loads((tmp_path / "resumed" / CHECKPOINT_JSON).read_text())
    assert checkpoint["step"] == 4
    assert checkpoint["rows_written"] == 3

    resumed = resume_experiment(tmp_path / "resumed" / CHECKPOINT_JSON)
    assert resumed.success
    assert resumed.csv_path.read_bytes() == straight.csv_path.read_bytes()
    assert resumed.final_snapshot.read_bytes() == straight.final_snapshot.read_bytes()


def test_main_run_and_resume(tmp_path, capsys):
    path = _write(tmp_path, _heat_config(tmp_path / "heat"))
    assert main(["run", str(path), "--threads", "1"]) == EXIT_OK
    out = capsys.readouterr().out
    assert "Termination: reached_T" in out
    assert "energy_nonincreasing" in out
    df = load_trajectory(tmp_path / "heat" / TRAJECTORY_CSV)
    assert is_nonincreasing(df["energy"])
    assert main(["resume", str(tmp_path / "heat" / CHECKPOINT_JSON)]) == EXIT_OK


def test_output_directory_from_environment(tmp_path, monkeypatch):
    path = _write(tmp_path, _heat_config(tmp_path / "configured"))
    monkeypatch.setenv("G2LAB_OUTPUT_DIR", str(tmp_path / "elsewhere"))
    assert main(["run", str(path)]) == EXIT_OK
    assert (tmp_path / "elsewhere" / TRAJECTORY_CSV).exists()
    assert not (tmp_path / "configured").exists()


def test_exit_codes_for_abnormal_runs(tmp_path):
    unstable = _heat_config(tmp_path / "unstable", stepper="euler", dt=10.0)
    unstable["initial"]["mode"] = [6]
    unstable.update(T=2000.0, sample_every=50)
    unstable["output"]["checkpoint_every"] = 0
    assert main(["run", str(_write(tmp_path, unstable, "a.json"))]) == EXIT_DIVERGED

    collapsing = _heat_config(tmp_path / "collapse", dt=1e7, adaptive=0.5)
    assert main(["run", str(_write(tmp_path, collapsing, "b.json"))]) == EXIT_CFL_COLLAPSE

    too_large = _config(tmp_path / "large")
    too_large["initial"]["epsilon"] = 50.0
    assert main(["run", str(_write(tmp_path, too_large, "c.json"))]) == EXIT_CONFIG

    assert main(["run", str(tmp_path / "absent.json")]) == EXIT_IO


def test_resume_rejects_bad_checkpoints(tmp_path):
    assert main(["resume", str(tmp_path / "checkpoint.json")]) == EXIT_IO
    broken = tmp_path / "checkpoint.json"
    broken.write_text("{}")
    assert main(["resume", str(broken)]) == EXIT_IO


def test_snapshot_on_another_grid_is_a_config_error(tmp_path):
    snapshot = write_snapshot(uniform_standard(Grid.torus((16,), length=TWO_PI)), tmp_path / "phi.g2f")
    data = _config(tmp_path / "out", initial={"kind": "from_snapshot", "path": snapshot.name})
    assert main(["run", str(_write(tmp_path, data))]) == EXIT_CONFIG


def test_diagnose_structure_snapshot(tmp_path, capsys):
    snapshot = write_snapshot(uniform_standard(Grid.torus((8,), length=TWO_PI)), tmp_path / "phi.g2f")
    assert main(["diagnose", str(snapshot)]) == EXIT_OK
    out = capsys.readouterr().out
    assert "energy_D" in out
    assert "metric oracle" in out


def test_diagnose_other_snapshots(tmp_path, capsys):
    grid = Grid.torus((8,), length=TWO_PI)
    one_form = write_snapshot(LatticeField.zeros(grid, 1), tmp_path / "alpha.g2f")
    assert main(["diagnose", str(one_form)]) == EXIT_OK
    assert "distance_to_mean" in capsys.readouterr().out

    degenerate = write_snapshot(LatticeField.zeros(grid, 3), tmp_path / "zero.g2f")
    assert main(["diagnose", str(degenerate)]) == EXIT_POSITIVITY

    garbage = tmp_path / "garbage.g2f"
    garbage.write_bytes(b"not a snapshot")
    assert main(["diagnose", str(garbage)]) == EXIT_IO


def test_validate_command(capsys):
    assert main(["validate"]) == EXIT_OK
    assert "all identities hold" in capsys.readouterr().out
    assert main(["validate", "--corrupt-star-degree", "0"]) == EXIT_VALIDATION
    assert "star_involution" in capsys.readouterr().out


def test_uniform_structure_run_is_stationary(tmp_path):
    data = _config(tmp_path / "flat", initial={"kind": "uniform_standard"})
    outcome = run_experiment(parse_config(data))
    df = load_trajectory(outcome.csv_path)
    assert np.allclose(df["volume"], df["volume"].iloc[0], rtol=1e-14)
    assert df["tau2_norm"].max() < 1e-10


def test_volume_monitor_counts_moves_against_the_flow(caplog):
    growing = VolumeMonitor(1)
    with caplog.at_level(logging.WARNING, logger="src.analysis.experiments"):
        assert [growing.check(v, t) for t, v in enumerate([1.0, 2.0, 1.5, 1.5, 3.0])] == [
            False,
            False,
            True,
            False,
            False,
        ]
    assert growing.violations == 1
    assert "volume decreased" in caplog.text

    shrinking = VolumeMonitor(-1)
    assert not shrinking.check(2.0, 0.0)
    assert shrinking.check(2.5, 1.0)
    assert not shrinking.check(1.0, 2.0)
    assert shrinking.violations == 1


def test_dirichlet_gradient_run_decreases_energy_and_watches_volume(tmp_path, caplog):
    data = _config(
        tmp_path / "dirichlet",
        grid={"extents": [4, 4, 1, 1, 1, 1, 1], "length": TWO_PI},
        initial={"kind": "closed_perturbation", "epsilon": 0.1},
        flow={
            "kind": "dirichlet_gradient",
            "stepper": "euler",
            "dt": 1e-3,
            "parameters": {"nu": [1.0, 1.0, 1.0, 1.0]},
        },
        T=0.005,
        sample_every=1,
    )
    with caplog.at_level(logging.WARNING, logger="src.analysis.experiments"):
        outcome = run_experiment(parse_config(data))
    assert outcome.success
    df = load_trajectory(outcome.csv_path)
    assert len(df) == 6
    energy = df["energy_Dnu"].to_numpy()
    assert is_nonincreasing(energy)
    assert energy[-1] < energy[0]

    volume = df["volume"].to_numpy()
    increases = int(np.sum(volume[1:] > volume[:-1] * (1.0 + 1e-12)))
    assert outcome.volume_violations == increases
    assert ("volume increased" in caplog.text) == (increases > 0)


def test_runs_do_not_depend_on_thread_count(tmp_path, monkeypatch):
    grid = {"extents": [8, 8, 1, 1, 1, 1, 1], "length": TWO_PI}
    single = _write(tmp_path, _config(tmp_path / "single", grid=grid, T=0.04), "single.json")
    several = _write(tmp_path, _config(tmp_path / "several", grid=grid, T=0.04), "several.json")
    assert main(["run", str(single), "--threads", "1"]) == EXIT_OK
    monkeypatch.setenv("G2LAB_THREADS", "4")
    assert main(["run", str(several)]) == EXIT_OK
    for name in (TRAJECTORY_CSV, FINAL_PHI):
        assert (tmp_path / "single" / name).read_bytes() == (tmp_path / "several" / name).read_bytes()
