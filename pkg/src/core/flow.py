from __future__ import annotations

from abc import ABC, abstractmethod
from dataclasses import dataclass, field
from typing import Any, Dict, Optional

from src.errors import ConfigError

FLOW_KINDS = (
    "heat",
    "heat_modified",
    "laplacian",
    "laplacian_deturck",
    "coflow",
    "modified_coflow",
    "dirichlet_gradient",
    "volume_gradient",
)
HEAT_KINDS = ("heat", "heat_modified")
COFLOW_KINDS = ("coflow", "modified_coflow")
STEPPERS = ("rk4", "euler")

# parameter name each kind needs; kinds not listed take none
REQUIRED_PARAMETERS: Dict[str, str] = {
    "heat_modified": "lambda1",
    "modified_coflow": "c",
    "dirichlet_gradient": "nu",
    "volume_gradient": "lambda",
}


@dataclass(frozen=True)
class FlowSpec:
    """
    What to integrate and how.

    Attributes:
        kind:       One of FLOW_KINDS.
        parameters: Exactly the parameter the kind requires, if any.
        stepper:    "rk4" or "euler".
        dt:         Nominal time step, > 0.
        adaptive:   CFL safety factor in (0, 1], or None for a fixed step.
    """

    kind: str
    parameters: Dict[str, Any] = field(default_factory=dict)
    stepper: str = "rk4"
    dt: float = 1e-3
    adaptive: Optional[float] = None

    def __post_init__(self) -> None:
        if self.kind not in FLOW_KINDS:
            raise ConfigError(f"unknown flow kind {self.kind!r}")
        if self.stepper not in STEPPERS:
            raise ConfigError(f"unknown stepper {self.stepper!r}")
        if not self.dt > 0.0:
            raise ConfigError(f"dt must be positive, got {self.dt}")
        if self.adaptive is not None and not 0.0 < self.adaptive <= 1.0:
            raise ConfigError(f"adaptive safety factor must lie in (0, 1], got {self.adaptive}")

        required = REQUIRED_PARAMETERS.get(self.kind)
        expected = {required} if required else set()
        if set(self.parameters) != expected:
            raise ConfigError(
                f"flow {self.kind!r} takes parameters {sorted(expected)}, got {sorted(self.parameters)}"
            )
        if self.kind == "dirichlet_gradient" and len(self.parameters["nu"]) != 4:
            raise ConfigError("dirichlet_gradient needs four weights nu")

    @property
    def is_heat(self) -> bool:
        return self.kind in HEAT_KINDS

    @property
    def is_coflow(self) -> bool:
        return self.kind in COFLOW_KINDS

    def parameter(self, name: str) -> Any:
        return self.parameters[name]


class Flow(ABC):
    """
    A flow on lattice fields.

    The integrated variable is phi for structure flows, psi for coflows and
    the field itself for heat flows; rate() returns its time derivative.
    """

    def __init__(self, spec: FlowSpec) -> None:
        self.spec = spec

    @property
    def kind(self) -> str:
        return self.spec.kind

    @abstractmethod
    def initial_state(self, field: Any, t: float = 0.0, step: int = 0, psi: Any = None) -> Any:
        raise NotImplementedError

    @abstractmethod
    def variable(self, state: Any) -> Any:
        raise NotImplementedError

    @abstractmethod
    def rebuild(self, variable: Any, t: float, previous: Any) -> Any:
        """State holding a new value of the variable; raises on positivity loss."""
        raise NotImplementedError

    @abstractmethod
    def rate(self, state: Any) -> Any:
        raise NotImplementedError

    def stiffness(self, state: Any) -> float:
        """Factor multiplying the flat Laplacian spectrum in the CFL bound."""
        return 1.0
