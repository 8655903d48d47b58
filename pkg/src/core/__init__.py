from .flow import (
    COFLOW_KINDS,
    FLOW_KINDS,
    HEAT_KINDS,
    REQUIRED_PARAMETERS,
    STEPPERS,
    Flow,
    FlowSpec,
)
from .state import FlowState
from .results import TerminationReason, Trajectory

__all__ = [
    "COFLOW_KINDS",
    "FLOW_KINDS",
    "HEAT_KINDS",
    "REQUIRED_PARAMETERS",
    "STEPPERS",
    "Flow",
    "FlowSpec",
    "FlowState",
    "TerminationReason",
    "Trajectory",
]
