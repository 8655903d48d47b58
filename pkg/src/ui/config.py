"""
Run configuration: one JSON document with "version": 1.

    {
      "version": 1,
      "seed": 7,
      "grid": {"extents": [16, 16, 16, 1, 1, 1, 1], "length": 6.283185307179586, "scheme": "spectral"},
      "initial": {"kind": "closed_perturbation", "epsilon": 0.05},
      "flow": {"kind": "laplacian", "parameters": {}, "stepper": "rk4", "dt": 0.001, "adaptive": 0.5},
      "T": 0.1,
      "sample_every": 10,
      "output": {"directory": "results/laplacian", "checkpoint_every": 50}
    }
"""
from __future__ import annotations

import json
import os
from dataclasses import asdict, dataclass, field
from pathlib import Path
from typing import Any, Dict, Mapping, Optional, Tuple, Union

from src.core import FlowSpec, HEAT_KINDS
from src.domain.exterior import DIM, n_components
from src.domain.lattice import Grid
from src.errors import ConfigError

CONFIG_VERSION = 1
THREADS_VARIABLE = "G2LAB_THREADS"
OUTPUT_VARIABLE = "G2LAB_OUTPUT_DIR"

STRUCTURE_INITIAL_KINDS = ("uniform_standard", "closed_perturbation", "coclosed_perturbation", "from_snapshot")
HEAT_INITIAL_KINDS = ("fourier_mode", "band_limited", "closed_form", "coclosed_form", "from_snapshot")


def _require(mapping: Mapping[str, Any], key: str, context: str) -> Any:
    if not isinstance(mapping, Mapping):
        raise ConfigError(f"{context} must be an object")
    if key not in mapping:
        raise ConfigError(f"missing key {context}.{key}")
    return mapping[key]


def _number(value: Any, name: str) -> float:
    if isinstance(value, bool) or not isinstance(value, (int, float)):
        raise ConfigError(f"{name} must be a number, got {value!r}")
    return float(value)


def _integer(value: Any, name: str, minimum: Optional[int] = None) -> int:
    if isinstance(value, bool) or not isinstance(value, int):
        raise ConfigError(f"{name} must be an integer, got {value!r}")
    if minimum is not None and value < minimum:
        raise ConfigError(f"{name} must be at least {minimum}, got {value}")
    return value


def _check_keys(mapping: Mapping[str, Any], allowed: Tuple[str, ...], context: str) -> None:
    unknown = sorted(set(mapping) - set(allowed))
    if unknown:
        raise ConfigError(f"unknown key(s) in {context}: {', '.join(unknown)}")


@dataclass(frozen=True)
class GridConfig:
    extents: Tuple[int, ...]
    spacings: Tuple[float, ...]
    scheme: str = "spectral"

    def build(self) -> Grid:
        try:
            return Grid(self.extents, self.spacings, self.scheme)
        except ValueError as exc:
            raise ConfigError(f"grid: {exc}") from exc


@dataclass(frozen=True)
class InitialConfig:
    kind: str
    epsilon: float = 0.0
    seed: Optional[int] = None
    path: Optional[str] = None
    mode: Tuple[int, ...] = ()
    component: int = 0
    degree: int = 0
    amplitude: float = 1.0


@dataclass(frozen=True)
class FlowConfig:
    kind: str
    parameters: Dict[str, Any] = field(default_factory=dict)
    stepper: str = "rk4"
    dt: float = 1e-3
    adaptive: Optional[float] = None

    def spec(self, grid: Grid) -> FlowSpec:
        """FlowSpec with lambda1 = "auto" resolved from the flat-torus spectrum."""
        parameters = dict(self.parameters)
        if parameters.get("lambda1") == "auto":
            parameters["lambda1"] = grid.first_eigenvalue()
        return FlowSpec(
            kind=self.kind,
            parameters=parameters,
            stepper=self.stepper,
            dt=self.dt,
            adaptive=self.adaptive,
        )


@dataclass(frozen=True)
class OutputConfig:
    directory: str = "results/run"
    checkpoint_every: int = 0


@dataclass(frozen=True)
class RunConfig:
    grid: GridConfig
    initial: InitialConfig
    flow: FlowConfig
    T: float
    sample_every: int = 1
    output: OutputConfig = field(default_factory=OutputConfig)
    seed: int = 0
    version: int = CONFIG_VERSION

    @property
    def initial_seed(self) -> int:
        return self.initial.seed if self.initial.seed is not None else self.seed

    def to_dict(self) -> Dict[str, Any]:
        data = asdict(self)
        data["grid"]["extents"] = list(self.grid.extents)
        data["grid"]["spacings"] = list(self.grid.spacings)
        data["initial"]["mode"] = list(self.initial.mode)
        return data


def _parse_grid(data: Mapping[str, Any]) -> GridConfig:
    _check_keys(data, ("extents", "spacings", "length", "scheme"), "grid")
    extents = _require(data, "extents", "grid")
    if not isinstance(extents, list) or len(extents) != DIM:
        raise ConfigError(f"grid.extents must list {DIM} integers")
    extents = tuple(_integer(n, "grid.extents[]", minimum=1) for n in extents)
    if "spacings" in data and "length" in data:
        raise ConfigError("grid takes either spacings or length, not both")
    if "spacings" in data:
        spacings = data["spacings"]
        if not isinstance(spacings, list) or len(spacings) != DIM:
            raise ConfigError(f"grid.spacings must list {DIM} numbers")
        spacings = tuple(_number(h, "grid.spacings[]") for h in spacings)
    else:
        length = _number(data.get("length", 1.0), "grid.length")
        spacings = tuple(length / n for n in extents)
    scheme = data.get("scheme", "spectral")
    return GridConfig(extents, spacings, scheme)


def _parse_initial(data: Mapping[str, Any], flow_kind: str, base_dir: Path) -> InitialConfig:
    _check_keys(
        data,
        ("kind", "epsilon", "seed", "path", "mode", "component", "degree", "amplitude"),
        "initial",
    )
    kind = _require(data, "kind", "initial")
    allowed = HEAT_INITIAL_KINDS if flow_kind in HEAT_KINDS else STRUCTURE_INITIAL_KINDS
    if kind not in allowed:
        raise ConfigError(f"initial.kind {kind!r} does not fit flow {flow_kind!r}; choose from {allowed}")

    seed = data.get("seed")
    if seed is not None:
        seed = _integer(seed, "initial.seed", minimum=0)
    path = None
    if kind == "from_snapshot":
        path = Path(_require(data, "path", "initial"))
        if not path.is_absolute():
            path = base_dir / path
        if not path.exists():
            raise ConfigError(f"initial.path {path} does not exist")
        path = str(path.resolve())

    epsilon = _number(data.get("epsilon", 0.0), "initial.epsilon")
    if kind in ("closed_perturbation", "coclosed_perturbation") and "epsilon" not in data:
        raise ConfigError(f"missing key initial.epsilon for {kind}")

    degree = _integer(data.get("degree", 0), "initial.degree", minimum=0)
    if degree > DIM:
        raise ConfigError(f"initial.degree must be at most {DIM}")
    if flow_kind == "heat_modified" and degree != 0:
        raise ConfigError("the modified heat flow evolves functions (initial.degree 0)")
    component = _integer(data.get("component", 0), "initial.component", minimum=0)
    if component >= n_components(degree):
        raise ConfigError(f"initial.component {component} out of range for degree {degree}")
    mode = data.get("mode", [])
    if not isinstance(mode, list):
        raise ConfigError("initial.mode must be a list of integers")
    mode = tuple(_integer(m, "initial.mode[]") for m in mode)
    if kind == "fourier_mode" and not mode:
        raise ConfigError("missing key initial.mode for fourier_mode")

    return InitialConfig(
        kind=kind,
        epsilon=epsilon,
        seed=seed,
        path=path,
        mode=mode,
        component=component,
        degree=degree,
        amplitude=_number(data.get("amplitude", 1.0), "initial.amplitude"),
    )


def _parse_flow(data: Mapping[str, Any]) -> FlowConfig:
    _check_keys(data, ("kind", "parameters", "stepper", "dt", "adaptive"), "flow")
    parameters = data.get("parameters", {})
    if not isinstance(parameters, Mapping):
        raise ConfigError("flow.parameters must be an object")
    adaptive = data.get("adaptive")
    return FlowConfig(
        kind=_require(data, "kind", "flow"),
        parameters=dict(parameters),
        stepper=data.get("stepper", "rk4"),
        dt=_number(_require(data, "dt", "flow"), "flow.dt"),
        adaptive=None if adaptive is None else _number(adaptive, "flow.adaptive"),
    )


def _parse_output(data: Mapping[str, Any]) -> OutputConfig:
    _check_keys(data, ("directory", "checkpoint_every"), "output")
    return OutputConfig(
        directory=str(data.get("directory", OutputConfig.directory)),
        checkpoint_every=_integer(data.get("checkpoint_every", 0), "output.checkpoint_every", minimum=0),
    )


def parse_config(data: Mapping[str, Any], base_dir: Union[str, Path] = ".") -> RunConfig:
    if not isinstance(data, Mapping):
        raise ConfigError("configuration must be a JSON object")
    _check_keys(data, ("version", "seed", "grid", "initial", "flow", "T", "sample_every", "output"), "config")
    version = _require(data, "version", "config")
    if version != CONFIG_VERSION:
        raise ConfigError(f"unsupported config version {version!r}, expected {CONFIG_VERSION}")

    grid = _parse_grid(_require(data, "grid", "config"))
    flow = _parse_flow(_require(data, "flow", "config"))
    config = RunConfig(
        grid=grid,
        initial=_parse_initial(_require(data, "initial", "config"), flow.kind, Path(base_dir)),
        flow=flow,
        T=_number(_require(data, "T", "config"), "T"),
        sample_every=_integer(data.get("sample_every", 1), "sample_every", minimum=1),
        output=_parse_output(data.get("output", {})),
        seed=_integer(data.get("seed", 0), "seed", minimum=0),
    )
    if not config.T >= 0.0:
        raise ConfigError(f"T must be non-negative, got {config.T}")
    # builds and validates the FlowSpec and grid up front
    config.flow.spec(grid.build())
    return config


def load_config(path: Union[str, Path]) -> RunConfig:
    path = Path(path)
    if not path.exists():
        raise FileNotFoundError(f"Config file not found: {path}")
    try:
        data = json.loads(path.read_text())
    except json.JSONDecodeError as exc:
        raise ConfigError(f"{path} is not valid JSON: {exc}") from exc
    return parse_config(data, base_dir=path.parent)


def apply_environment(config: RunConfig, environ: Optional[Mapping[str, str]] = None) -> RunConfig:
    """Replace output.directory with G2LAB_OUTPUT_DIR when it is set."""
    environ = os.environ if environ is None else environ
    directory = environ.get(OUTPUT_VARIABLE)
    if not directory:
        return config
    output = OutputConfig(directory=directory, checkpoint_every=config.output.checkpoint_every)
    return RunConfig(
        grid=config.grid,
        initial=config.initial,
        flow=config.flow,
        T=config.T,
        sample_every=config.sample_every,
        output=output,
        seed=config.seed,
        version=config.version,
    )


def thread_count(requested: Optional[int] = None, environ: Optional[Mapping[str, str]] = None) -> Optional[int]:
    """FFT worker count: the command-line value, else G2LAB_THREADS, else None."""
    if requested is not None:
        if requested < 1:
            raise ConfigError(f"--threads must be positive, got {requested}")
        return requested
    environ = os.environ if environ is None else environ
    raw = environ.get(THREADS_VARIABLE)
    if not raw:
        return None
    try:
        value = int(raw)
    except ValueError as exc:
        raise ConfigError(f"{THREADS_VARIABLE} must be a positive integer, got {raw!r}") from exc
    if value < 1:
        raise ConfigError(f"{THREADS_VARIABLE} must be a positive integer, got {raw!r}")
    return value
