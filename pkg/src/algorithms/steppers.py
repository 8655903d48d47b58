from __future__ import annotations

from typing import Callable, Dict

import numpy as np

from src.domain.lattice import Grid, LatticeField

RateFunction = Callable[[LatticeField, float], LatticeField]
Stepper = Callable[[LatticeField, float, float, RateFunction], LatticeField]

# real-axis stability interval of each explicit scheme
STABILITY_RADIUS: Dict[str, float] = {"euler": 2.0, "rk4": 2.785}


def euler_stepper() -> Stepper:
    def advance(y: LatticeField, t: float, dt: float, rate: RateFunction) -> LatticeField:
        return y + rate(y, t).scaled(dt)

    return advance


def rk4_stepper() -> Stepper:
    def advance(y: LatticeField, t: float, dt: float, rate: RateFunction) -> LatticeField:
        k1 = rate(y, t)
        k2 = rate(y + k1.scaled(0.5 * dt), t + 0.5 * dt)
        k3 = rate(y + k2.scaled(0.5 * dt), t + 0.5 * dt)
        k4 = rate(y + k3.scaled(dt), t + dt)
        increment = k1 + k2.scaled(2.0) + k3.scaled(2.0) + k4
        return y + increment.scaled(dt / 6.0)

    return advance


def make_stepper(name: str) -> Stepper:
    if name == "euler":
        return euler_stepper()
    if name == "rk4":
        return rk4_stepper()
    raise ValueError(f"Unknown stepper: {name}")


def cfl_limit(grid: Grid, stepper: str, stiffness: float, safety: float = 1.0) -> float:
    """
    Largest stable dt for a second-order flow:
        safety * r / (lambda_max(flat Laplacian) * max eig(g^-1)).
    """
    denominator = grid.max_laplacian_eigenvalue() * stiffness
    if denominator <= 0.0:
        return float(np.inf)
    return safety * STABILITY_RADIUS[stepper] / denominator
