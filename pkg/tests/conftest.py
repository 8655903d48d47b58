import numpy as np
import pytest

from src.algorithms.initial import (
    make_closed_perturbation,
    make_coclosed_perturbation,
    uniform_standard,
)
from src.domain.exterior import DIM, Metric, MultiIndex, n_components
from src.domain.lattice import Grid, LatticeField

TWO_PI = 2.0 * np.pi


def random_spd(rng: np.random.Generator, count: int) -> Metric:
    base = rng.standard_normal((count, DIM, DIM))
    return Metric.from_matrix(base @ np.swapaxes(base, -1, -2) / DIM + np.eye(DIM))


def _line_potential(grid: Grid, degree: int, terms) -> LatticeField:
    x = np.broadcast_to(grid.coordinates(0), grid.shape)
    values = np.zeros(grid.shape + (n_components(degree),))
    for labels, (kind, weight) in terms.items():
        wave = np.cos(x) if kind == "cos" else np.sin(x)
        values[..., MultiIndex(labels).position] = weight * wave
    return LatticeField(grid, degree, values)


def closed_structure(n: int, epsilon: float = 0.1) -> LatticeField:
    """phi_0 + epsilon d(eta) on a 2π line, eta depending on x1 only."""
    grid = Grid.torus((n,), length=TWO_PI)
    eta = _line_potential(
        grid,
        2,
        {(2, 3): ("cos", 1.0), (4, 6): ("sin", 1.0), (5, 7): ("cos", 0.5)},
    )
    return make_closed_perturbation(uniform_standard(grid), eta, epsilon)


def coclosed_structure(n: int, epsilon: float = 0.1) -> LatticeField:
    """The structure with psi = psi_0 + epsilon d(xi) on a 2π line."""
    grid = Grid.torus((n,), length=TWO_PI)
    xi = _line_potential(grid, 3, {(2, 3, 4): ("cos", 1.0), (5, 6, 7): ("sin", 1.0)})
    return make_coclosed_perturbation(uniform_standard(grid), xi, epsilon)


@pytest.fixture
def rng():
    return np.random.default_rng(1234)


@pytest.fixture
def line_grid():
    return Grid.torus((16,), length=TWO_PI)


@pytest.fixture
def plane_grid():
    return Grid.torus((8, 8), length=TWO_PI)


@pytest.fixture
def cube_grid():
    return Grid.torus((6, 6, 6), length=TWO_PI)


def observed_orders(errors, floor: float = 0.0):
    """log2 of successive error ratios under halving; None once the error is below floor."""
    return [None if fine <= floor else float(np.log2(coarse / fine)) for coarse, fine in zip(errors, errors[1:])]


def assert_order(errors, order: float, floor: float = 0.0) -> None:
    for observed in observed_orders(errors, floor):
        assert observed is None or observed >= order, f"errors {errors} converge below order {order}"
