from __future__ import annotations

from typing import Optional


class DegreeError(ValueError):
    """Form degree out of range or mismatched between operands."""


class NonFiniteError(ValueError):
    """A form or field holds NaN or infinite coefficients."""


class PositivityError(ValueError):
    """
    A 3-form is not positive, or a metric is not positive definite.

    Attributes:
        bad_sites:   Number of lattice sites (or points) that failed.
        max_epsilon: Largest admissible perturbation amplitude when the failure
                     comes from a perturbation request, else None.
    """

    def __init__(
        self,
        message: str,
        bad_sites: int = 0,
        max_epsilon: Optional[float] = None,
    ) -> None:
        super().__init__(message)
        self.bad_sites = bad_sites
        self.max_epsilon = max_epsilon


class ConditioningError(ValueError):
    def __init__(self, message: str, condition: float = float("inf")) -> None:
        super().__init__(message)
        self.condition = condition


class GridMismatchError(ValueError):
    pass


class DofBudgetError(ValueError):
    pass


class ConfigError(ValueError):
    pass


class SnapshotFormatError(ValueError):
    pass


class ConvergenceError(RuntimeError):
    pass
