from __future__ import annotations

from dataclasses import dataclass, field
from enum import Enum
from typing import Any, List, Optional

from .state import FlowState


class TerminationReason(str, Enum):
    REACHED_T = "reached_T"
    POSITIVITY_LOST = "positivity_lost"
    CFL_COLLAPSE = "cfl_collapse"
    DIVERGED = "diverged"


@dataclass
class Trajectory:
    """
    Container for flow outcomes.

    Attributes:
        samples:      States kept at the sample points, strictly increasing in t.
        sample_every: Sampling interval in steps.
        reason:       Why the run stopped.
        final_state:  Last valid state reached (sampled or not).
        records:      Whatever the observer returned at each sample.
        runtime:      Wall clock runtime in seconds.
        steps:        Steps taken during this run (a resumed run counts from its start).
        message:      Detail for abnormal terminations.
    """
    samples: List[FlowState]
    sample_every: int
    reason: TerminationReason
    final_state: FlowState
    records: List[Any] = field(default_factory=list)
    runtime: float = 0.0
    steps: int = 0
    message: Optional[str] = None

    @property
    def success(self) -> bool:
        return self.reason is TerminationReason.REACHED_T

    @property
    def times(self) -> List[float]:
        return [state.t for state in self.samples]

    @property
    def final_time(self) -> float:
        return self.final_state.t
