"""Initial data: band-limited random fields, Fourier modes and perturbed G2 structures."""
from __future__ import annotations

import itertools
import logging
from typing import Callable, List, Optional, Tuple

import numpy as np

from src.domain.exterior import DIM, n_components
from src.domain.g2_fields import frame_field, psi_field
from src.domain.g2_pointwise import phi_from_psi, standard_phi
from src.domain.lattice import Grid, LatticeField, MetricField, codiff, d
from src.errors import (
    ConditioningError,
    ConvergenceError,
    DegreeError,
    NonFiniteError,
    PositivityError,
)

logger = logging.getLogger(__name__)

Mode = Tuple[int, ...]

# failures that mark a perturbation amplitude as inadmissible
_NOT_POSITIVE = (PositivityError, ConditioningError, ConvergenceError, NonFiniteError)


def uniform_standard(grid: Grid) -> LatticeField:
    return LatticeField.uniform(grid, standard_phi())


def _phase(grid: Grid, mode: Mode) -> np.ndarray:
    """2π m·x / L over the grid, for a mode given on the active axes."""
    phase = np.zeros(grid.shape)
    for m, axis in zip(mode, grid.active_axes):
        phase = phase + 2.0 * np.pi * m * grid.coordinates(axis) / grid.lengths[axis]
    return phase


def low_modes(grid: Grid, max_shell: int = 3) -> List[Mode]:
    """
    Nonzero integer modes on the active axes with |m|^2 <= max_shell,
    one of each ± pair, |m_i| < N_i / 2, ordered by shell.
    """
    axes = grid.active_axes
    radius = int(np.floor(np.sqrt(max_shell)))
    modes = []
    for mode in itertools.product(range(-radius, radius + 1), repeat=len(axes)):
        shell = sum(m * m for m in mode)
        if shell == 0 or shell > max_shell:
            continue
        if next(m for m in mode if m != 0) < 0:
            continue
        if any(2 * abs(m) >= grid.extents[axis] for m, axis in zip(mode, axes)):
            continue
        modes.append(mode)
    return sorted(modes, key=lambda mode: (sum(m * m for m in mode), mode))


def band_limited_form(
    grid: Grid,
    degree: int,
    rng: np.random.Generator,
    amplitude: float = 1.0,
    max_shell: int = 3,
) -> LatticeField:
    """Random degree-k field on the lowest Fourier shells, zero mean, sup norm = amplitude."""
    modes = low_modes(grid, max_shell)
    if not modes:
        raise ValueError(f"grid {grid.extents} has no admissible low Fourier modes")
    size = n_components(degree)
    values = np.zeros(grid.shape + (size,))
    for mode in modes:
        phase = _phase(grid, mode)[..., None]
        coeffs = rng.standard_normal((2, size))
        values += np.cos(phase) * coeffs[0] + np.sin(phase) * coeffs[1]
    peak = float(np.max(np.abs(values)))
    if peak > 0.0:
        values *= amplitude / peak
    return LatticeField(grid, degree, values)


def fourier_mode(
    grid: Grid,
    degree: int,
    mode: Mode,
    component: int = 0,
    amplitude: float = 1.0,
) -> LatticeField:
    """amplitude * cos(2π m·x / L) in one coefficient component."""
    if len(mode) != len(grid.active_axes):
        raise ValueError(f"mode needs one entry per active axis {grid.active_axes}")
    values = np.zeros(grid.shape + (n_components(degree),))
    values[..., component] = amplitude * np.cos(_phase(grid, mode))
    return LatticeField(grid, degree, values)


def mode_eigenvalue(grid: Grid, mode: Mode) -> float:
    """Eigenvalue of the discrete flat Laplacian on a Fourier mode."""
    total = 0.0
    for m, axis in zip(mode, grid.active_axes):
        k = 2.0 * np.pi * m / grid.lengths[axis]
        h = grid.spacings[axis]
        if grid.scheme == "central":
            k = np.sin(k * h) / h
        elif 2 * abs(m) == grid.extents[axis]:
            k = 0.0
        total += k ** 2
    return float(total)


def _largest_admissible(build: Callable[[float], object], upper: float, iterations: int = 40) -> float:
    low, high = 0.0, upper
    for _ in range(iterations):
        middle = 0.5 * (low + high)
        try:
            build(middle)
        except _NOT_POSITIVE:
            high = middle
        else:
            low = middle
    return low


def make_closed_perturbation(base: LatticeField, eta: LatticeField, epsilon: float) -> LatticeField:
    """phi_0 + epsilon d(eta): closed, with the periods of phi_0."""
    if base.degree != 3 or eta.degree != 2:
        raise DegreeError("closed perturbation needs a 3-form base and a 2-form potential")
    exact = d(eta)

    def build(amplitude: float) -> LatticeField:
        phi = base + exact.scaled(amplitude)
        frame_field(phi)
        return phi

    try:
        return build(epsilon)
    except _NOT_POSITIVE as exc:
        admissible = _largest_admissible(build, epsilon)
        raise PositivityError(
            f"perturbation amplitude {epsilon} leaves the positive cone; "
            f"largest admissible amplitude is about {admissible:.6g}",
            bad_sites=getattr(exc, "bad_sites", 0),
            max_epsilon=admissible,
        ) from exc


def make_coclosed_perturbation(base: LatticeField, xi: LatticeField, epsilon: float) -> LatticeField:
    """The structure whose 4-form is psi_0 + epsilon d(xi), recovered by Newton iteration."""
    if base.degree != 3 or xi.degree != 3:
        raise DegreeError("coclosed perturbation needs a 3-form base and a 3-form potential")
    base_psi = psi_field(base, frame_field(base))
    exact = d(xi)

    def build(amplitude: float) -> LatticeField:
        psi = base_psi + exact.scaled(amplitude)
        frame = phi_from_psi(psi.as_form(), guess=base.as_form())
        return LatticeField.from_form(base.grid, frame.phi)

    try:
        return build(epsilon)
    except _NOT_POSITIVE as exc:
        admissible = _largest_admissible(build, epsilon)
        raise PositivityError(
            f"coclosed perturbation amplitude {epsilon} is not admissible; "
            f"largest admissible amplitude is about {admissible:.6g}",
            max_epsilon=admissible,
        ) from exc


def _normalized_potential(grid: Grid, degree: int, rng: np.random.Generator) -> LatticeField:
    """Band-limited potential scaled so that max |d potential| = 1."""
    potential = band_limited_form(grid, degree, rng)
    peak = d(potential).sup_norm()
    if peak == 0.0:
        raise ValueError("random potential is closed; grid too small")
    return potential.scaled(1.0 / peak)


def random_closed_structure(
    grid: Grid,
    rng: np.random.Generator,
    epsilon: float,
    base: Optional[LatticeField] = None,
) -> LatticeField:
    base = base if base is not None else uniform_standard(grid)
    return make_closed_perturbation(base, _normalized_potential(grid, 2, rng), epsilon)


def random_coclosed_structure(
    grid: Grid,
    rng: np.random.Generator,
    epsilon: float,
    base: Optional[LatticeField] = None,
) -> LatticeField:
    base = base if base is not None else uniform_standard(grid)
    return make_coclosed_perturbation(base, _normalized_potential(grid, 3, rng), epsilon)


def closed_heat_data(grid: Grid, degree: int, rng: np.random.Generator) -> LatticeField:
    """Constant plus d(eta): a closed k-form field."""
    if not 1 <= degree <= DIM:
        raise DegreeError("closed heat data needs degree 1..7")
    constant = rng.standard_normal(n_components(degree))
    exact = d(band_limited_form(grid, degree - 1, rng))
    return LatticeField(grid, degree, exact.values + constant)


def coclosed_heat_data(grid: Grid, degree: int, rng: np.random.Generator) -> LatticeField:
    """Constant plus δ(zeta) for the flat metric: a coclosed k-form field."""
    if not 0 <= degree < DIM:
        raise DegreeError("coclosed heat data needs degree 0..6")
    constant = rng.standard_normal(n_components(degree))
    coexact = codiff(band_limited_form(grid, degree + 1, rng), MetricField.flat(grid))
    return LatticeField(grid, degree, coexact.values + constant)
