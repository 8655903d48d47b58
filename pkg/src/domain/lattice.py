"""
Discrete exterior calculus on a flat periodic 7-dimensional grid.

A field stores one coefficient vector per site: values has shape
extents + (C(7, k),). Directions with extent 1 are degenerate: fields are
constant along them and every derivative in that direction vanishes.

The codifferential is built as the exact adjoint of d with respect to the
metric L2 pairing, so integration by parts holds to rounding.
"""
from __future__ import annotations

import logging
from dataclasses import dataclass
from functools import lru_cache
from typing import Optional, Tuple

import numpy as np
import scipy.fft as sp_fft

from src.domain.exterior import (
    DIM,
    AltForm,
    Metric,
    n_components,
    wedge_operator,
)
from src.errors import ConditioningError, DegreeError, GridMismatchError

logger = logging.getLogger(__name__)

SCHEMES = ("spectral", "central")
MAX_METRIC_CONDITION = 1e8


@dataclass(frozen=True)
class Grid:
    extents: Tuple[int, ...]
    spacings: Tuple[float, ...]
    scheme: str = "spectral"

    def __post_init__(self) -> None:
        extents = tuple(int(n) for n in self.extents)
        spacings = tuple(float(h) for h in self.spacings)
        if len(extents) != DIM or len(spacings) != DIM:
            raise ValueError(f"grid needs {DIM} extents and {DIM} spacings")
        if any(n < 1 for n in extents):
            raise ValueError(f"extents must be positive, got {extents}")
        if any(not np.isfinite(h) or h <= 0.0 for h in spacings):
            raise ValueError(f"spacings must be finite and positive, got {spacings}")
        if self.scheme not in SCHEMES:
            raise ValueError(f"unknown derivative scheme {self.scheme!r}")
        if self.scheme == "spectral" and any(1 < n < 4 for n in extents):
            raise ValueError("spectral scheme needs every extent to be 1 or at least 4")
        object.__setattr__(self, "extents", extents)
        object.__setattr__(self, "spacings", spacings)

    @classmethod
    def torus(
        cls,
        active: Tuple[int, ...],
        length: float = 1.0,
        scheme: str = "spectral",
    ) -> "Grid":
        """Grid whose first len(active) directions have the given extents and period length."""
        extents = tuple(active) + (1,) * (DIM - len(active))
        spacings = tuple(length / n for n in extents)
        return cls(extents, spacings, scheme)

    @property
    def shape(self) -> Tuple[int, ...]:
        return self.extents

    @property
    def n_sites(self) -> int:
        return int(np.prod(self.extents))

    @property
    def cell_volume(self) -> float:
        return float(np.prod(self.spacings))

    @property
    def lengths(self) -> Tuple[float, ...]:
        return tuple(n * h for n, h in zip(self.extents, self.spacings))

    @property
    def active_axes(self) -> Tuple[int, ...]:
        return tuple(i for i, n in enumerate(self.extents) if n > 1)

    def coordinates(self, axis: int) -> np.ndarray:
        """Coordinate of every site along one axis, broadcastable to the grid shape."""
        shape = [1] * DIM
        shape[axis] = self.extents[axis]
        return (np.arange(self.extents[axis]) * self.spacings[axis]).reshape(shape)

    def wavenumbers(self, axis: int) -> np.ndarray:
        """Angular wavenumbers of the rfft bins along one axis, Nyquist bin zeroed."""
        n = self.extents[axis]
        k = 2.0 * np.pi * sp_fft.rfftfreq(n, d=self.spacings[axis])
        if n % 2 == 0:
            k[-1] = 0.0
        return k

    def max_laplacian_eigenvalue(self) -> float:
        total = 0.0
        for axis in self.active_axes:
            if self.scheme == "spectral":
                total += float(np.max(self.wavenumbers(axis) ** 2))
            else:
                total += 1.0 / self.spacings[axis] ** 2
        return total

    def first_eigenvalue(self) -> float:
        """Smallest nonzero eigenvalue of the flat Laplacian on 0-forms."""
        values = []
        for axis in self.active_axes:
            k = 2.0 * np.pi / self.lengths[axis]
            if self.scheme == "central":
                k = np.sin(k * self.spacings[axis]) / self.spacings[axis]
            values.append(k ** 2)
        if not values:
            raise ValueError("grid has no active direction")
        return float(min(values))


@dataclass(frozen=True)
class LatticeField:
    grid: Grid
    degree: int
    values: np.ndarray

    def __post_init__(self) -> None:
        values = np.asarray(self.values, dtype=float)
        expected = self.grid.shape + (n_components(self.degree),)
        if values.shape != expected:
            raise ValueError(f"field values must have shape {expected}, got {values.shape}")
        object.__setattr__(self, "values", values)

    @classmethod
    def zeros(cls, grid: Grid, degree: int) -> "LatticeField":
        return cls(grid, degree, np.zeros(grid.shape + (n_components(degree),)))

    @classmethod
    def uniform(cls, grid: Grid, form: AltForm) -> "LatticeField":
        values = np.broadcast_to(form.coeffs, grid.shape + form.coeffs.shape[-1:]).copy()
        return cls(grid, form.degree, values)

    @classmethod
    def from_form(cls, grid: Grid, form: AltForm) -> "LatticeField":
        return cls(grid, form.degree, form.coeffs)

    def as_form(self) -> AltForm:
        return AltForm(self.degree, self.values)

    def _check_compatible(self, other: "LatticeField") -> None:
        if other.grid != self.grid:
            raise GridMismatchError("fields live on different grids")
        if other.degree != self.degree:
            raise DegreeError(f"degree mismatch: {self.degree} vs {other.degree}")

    def __add__(self, other: "LatticeField") -> "LatticeField":
        self._check_compatible(other)
        return LatticeField(self.grid, self.degree, self.values + other.values)

    def __sub__(self, other: "LatticeField") -> "LatticeField":
        self._check_compatible(other)
        return LatticeField(self.grid, self.degree, self.values - other.values)

    def __neg__(self) -> "LatticeField":
        return LatticeField(self.grid, self.degree, -self.values)

    def scaled(self, factor) -> "LatticeField":
        """Multiply by a number or by a 0-form given as an array of grid shape."""
        factor = np.asarray(factor, dtype=float)
        if factor.ndim:
            factor = factor[..., None]
        return LatticeField(self.grid, self.degree, factor * self.values)

    def sup_norm(self) -> float:
        return float(np.max(np.abs(self.values)))


@dataclass(frozen=True)
class MetricField:
    grid: Grid
    metric: Metric

    def __post_init__(self) -> None:
        batch = self.metric.g.shape[:-2]
        if batch not in ((), self.grid.shape):
            raise GridMismatchError(f"metric batch shape {batch} does not match grid {self.grid.shape}")
        condition = float(np.max(self.metric.condition_number()))
        if condition > MAX_METRIC_CONDITION:
            raise ConditioningError(
                f"metric field condition number {condition:.3e} exceeds bound",
                condition=condition,
            )

    @classmethod
    def flat(cls, grid: Grid) -> "MetricField":
        return cls(grid, Metric.identity())

    @property
    def is_uniform(self) -> bool:
        return self.metric.g.ndim == 2

    def is_flat(self, tolerance: float = 1e-12) -> bool:
        return bool(np.max(np.abs(self.metric.g - np.eye(DIM))) <= tolerance)

    def vol_scale(self) -> np.ndarray:
        return np.broadcast_to(self.metric.vol_scale, self.grid.shape)


@dataclass(frozen=True)
class Periods:
    """Grid average of each component of a (closed) field, with its d-residual."""

    degree: int
    values: np.ndarray
    d_residual: float = 0.0

    def drift(self, other: "Periods") -> float:
        return float(np.max(np.abs(self.values - other.values)))


def tree_sum(values: np.ndarray, site_axes: int = DIM) -> np.ndarray:
    """
    Pairwise sum over the leading site axes.

    The summation order depends only on the number of sites, so results are
    reproducible regardless of threading.
    """
    values = np.asarray(values, dtype=float)
    sites = int(np.prod(values.shape[:site_axes]))
    flat = values.reshape((sites,) + values.shape[site_axes:])
    size = 1 << max(sites - 1, 0).bit_length()
    if size > sites:
        pad = np.zeros((size - sites,) + flat.shape[1:])
        flat = np.concatenate([flat, pad], axis=0)
    while flat.shape[0] > 1:
        flat = flat[0::2] + flat[1::2]
    return flat[0]


def partial(values: np.ndarray, axis: int, grid: Grid, scheme: Optional[str] = None) -> np.ndarray:
    """Derivative along one grid axis of an array whose leading axes are the grid."""
    n = grid.extents[axis]
    if n == 1:
        return np.zeros_like(values)
    scheme = scheme or grid.scheme
    if scheme == "spectral":
        shape = [1] * values.ndim
        k = grid.wavenumbers(axis)
        shape[axis] = k.size
        spectrum = sp_fft.rfft(values, axis=axis)
        return sp_fft.irfft(spectrum * (1j * k.reshape(shape)), n=n, axis=axis)
    h = grid.spacings[axis]
    return (np.roll(values, -1, axis=axis) - np.roll(values, 1, axis=axis)) / (2.0 * h)


def gradient(values: np.ndarray, grid: Grid, scheme: Optional[str] = None) -> np.ndarray:
    """All seven partial derivatives stacked on a new axis right after the grid axes."""
    return np.stack([partial(values, axis, grid, scheme) for axis in range(DIM)], axis=DIM)


@lru_cache(maxsize=None)
def _step_matrix(axis: int, degree: int) -> np.ndarray:
    """Matrix of e^axis ∧ . from degree-k to degree-(k+1) forms."""
    e = np.zeros(DIM)
    e[axis] = 1.0
    return wedge_operator(AltForm(1, e), degree)


def d(field: LatticeField, scheme: Optional[str] = None) -> LatticeField:
    k = field.degree
    if k >= DIM:
        raise DegreeError("d of a top-degree field is not defined")
    out = np.zeros(field.grid.shape + (n_components(k + 1),))
    for axis in field.grid.active_axes:
        out += partial(field.values, axis, field.grid, scheme) @ _step_matrix(axis, k).T
    return LatticeField(field.grid, k + 1, out)


def _check_metric(field: LatticeField, mf: MetricField) -> None:
    if mf.grid != field.grid:
        raise GridMismatchError("metric field and form field live on different grids")


def codiff(field: LatticeField, mf: MetricField) -> LatticeField:
    """
    Adjoint of d under l2_inner:
        delta b = Λ^(k-1)(g) / vol_scale · ( - sum_i ∂_i [ W_i^T (Λ^k(g^-1) vol_scale b) ] )
    with W_i the matrix of e^i ∧ . on (k-1)-forms.
    """
    k = field.degree
    if k == 0:
        raise DegreeError("codifferential of a 0-form is not defined")
    _check_metric(field, mf)
    weights = np.asarray(mf.metric.vol_scale)[..., None]
    upper = np.einsum("...ij,...j->...i", mf.metric.raised(k), field.values) * weights
    acc = np.zeros(field.grid.shape + (n_components(k - 1),))
    for axis in field.grid.active_axes:
        acc -= partial(upper @ _step_matrix(axis, k - 1), axis, field.grid)
    lowered = np.einsum("...ij,...j->...i", mf.metric.lowered(k - 1), acc) / weights
    return LatticeField(field.grid, k - 1, lowered)


def hodge_laplacian(field: LatticeField, mf: MetricField) -> LatticeField:
    out = LatticeField.zeros(field.grid, field.degree)
    if field.degree >= 1:
        out = out + d(codiff(field, mf))
    if field.degree < DIM:
        out = out + codiff(d(field), mf)
    return out


def pointwise_inner(a: LatticeField, b: LatticeField, mf: MetricField) -> np.ndarray:
    a._check_compatible(b)
    _check_metric(a, mf)
    return np.einsum("...i,...ij,...j->...", a.values, mf.metric.raised(a.degree), b.values)


def l2_inner(a: LatticeField, b: LatticeField, mf: MetricField) -> float:
    density = pointwise_inner(a, b, mf) * mf.vol_scale()
    return float(tree_sum(density)) * a.grid.cell_volume


def l2_norm_squared(a: LatticeField, mf: MetricField) -> float:
    return l2_inner(a, a, mf)


def integrate_scalar(density: np.ndarray, grid: Grid) -> float:
    """Riemann sum of a function given per site (no metric weight)."""
    return float(tree_sum(np.broadcast_to(density, grid.shape))) * grid.cell_volume


def integrate_top(field: LatticeField) -> float:
    if field.degree != DIM:
        raise DegreeError("only 7-forms can be integrated")
    return integrate_scalar(field.values[..., 0], field.grid)


def grid_mean(field: LatticeField) -> np.ndarray:
    return tree_sum(field.values) / field.grid.n_sites


def periods(field: LatticeField) -> Periods:
    residual = d(field).sup_norm() if field.degree < DIM else 0.0
    return Periods(field.degree, grid_mean(field), residual)


def highest_frequency_fraction(field: LatticeField) -> float:
    """Share of spectral energy in modes with |m_i| > N_i / 3 along some active axis."""
    axes = field.grid.active_axes
    if not axes:
        return 0.0
    spectrum = sp_fft.fftn(field.values, axes=axes)
    energy = np.abs(spectrum) ** 2
    high = np.zeros(field.grid.shape, dtype=bool)
    for axis in axes:
        n = field.grid.extents[axis]
        modes = np.abs(sp_fft.fftfreq(n) * n)
        shape = [1] * DIM
        shape[axis] = n
        high = high | (modes.reshape(shape) > n / 3.0)
    total = float(tree_sum(energy.sum(axis=-1)))
    if total == 0.0:
        return 0.0
    return float(tree_sum(np.where(high, energy.sum(axis=-1), 0.0))) / total
