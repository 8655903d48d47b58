from __future__ import annotations

from dataclasses import dataclass, field
from typing import Any, List, Optional

from src.domain.g2_pointwise import G2Frame
from src.domain.lattice import LatticeField


@dataclass(slots=True)
class FlowState:
    """
    One point of a flow.

    For structure flows `field` is phi and `frame` its per-site G2 frame;
    coflows also carry the integrated 4-form `psi`. Heat flows have no frame.
    `diagnostics` is the time series accumulated so far, shared along a run.
    """

    t: float
    field: LatticeField
    frame: Optional[G2Frame] = None
    psi: Optional[LatticeField] = None
    step: int = 0
    diagnostics: List[Any] = field(default_factory=list)

    @property
    def phi(self) -> LatticeField:
        if self.frame is None:
            raise AttributeError("heat-flow states carry no G2 structure")
        return self.field

    @property
    def grid(self):
        return self.field.grid
