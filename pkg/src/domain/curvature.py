"""
Metric curvature on the lattice by central differences.

This is the independent oracle for every identity that involves Ricci or
scalar curvature: it only sees the metric field, never the G2 structure.
Tensor fields carry the grid axes first and tensor indices last.
"""
from __future__ import annotations

import logging
from functools import lru_cache

import numpy as np

from src.domain.exterior import DIM, derivation_operators
from src.domain.lattice import Grid, LatticeField, MetricField, gradient

logger = logging.getLogger(__name__)

ORACLE_SCHEME = "central"


def _full_field(array: np.ndarray, grid: Grid, tail: tuple) -> np.ndarray:
    return np.broadcast_to(array, grid.shape + tail)


def christoffel(mf: MetricField, scheme: str = ORACLE_SCHEME) -> np.ndarray:
    """Gamma[..., m, i, j] = Γ^m_ij of the metric field."""
    g = _full_field(mf.metric.g, mf.grid, (DIM, DIM))
    g_inv = _full_field(mf.metric.g_inv, mf.grid, (DIM, DIM))
    dg = gradient(g, mf.grid, scheme)
    lowered = 0.5 * (
        np.einsum("...ilj->...lij", dg) + np.einsum("...jli->...lij", dg) - dg
    )
    return np.einsum("...ml,...lij->...mij", g_inv, lowered)


def ricci_oracle(mf: MetricField, scheme: str = ORACLE_SCHEME) -> np.ndarray:
    """
    Ricci tensor field
        Ric_ij = ∂_m Γ^m_ij - ∂_j Γ^m_im + Γ^m_mp Γ^p_ij - Γ^m_jp Γ^p_im
    with every derivative a central difference.
    """
    gamma = christoffel(mf, scheme)
    dgamma = gradient(gamma, mf.grid, scheme)
    ricci = (
        np.einsum("...mmij->...ij", dgamma)
        - np.einsum("...jmim->...ij", dgamma)
        + np.einsum("...mmp,...pij->...ij", gamma, gamma)
        - np.einsum("...mjp,...pim->...ij", gamma, gamma)
    )
    return 0.5 * (ricci + np.swapaxes(ricci, -1, -2))


def scalar_curvature(mf: MetricField, ricci: np.ndarray | None = None) -> np.ndarray:
    ricci = ricci if ricci is not None else ricci_oracle(mf)
    return np.einsum("...ij,...ij->...", mf.metric.g_inv, ricci)


@lru_cache(maxsize=None)
def _derivations(degree: int) -> np.ndarray:
    return derivation_operators(degree)


def covariant_derivative(field: LatticeField, mf: MetricField, scheme: str = ORACLE_SCHEME) -> np.ndarray:
    """
    ∇_l of a form field, shape grid + (7, C(7, k)):
        ∇_l a = ∂_l a - A_l · a,   (A_l)[n, a] = Γ^n_la acting as a derivation.
    """
    gamma = christoffel(mf, scheme)
    partials = gradient(field.values, field.grid, scheme)
    derivations = np.einsum("naij,...j->...nai", _derivations(field.degree), field.values)
    correction = np.einsum("...nla,...nai->...li", gamma, derivations)
    return partials - correction


def covariant_norm_squared(field: LatticeField, mf: MetricField, scheme: str = ORACLE_SCHEME) -> np.ndarray:
    """|∇a|^2 per site, with the form norm on the form slot."""
    nabla = covariant_derivative(field, mf, scheme)
    paired = np.einsum("...li,...ij,...pj->...lp", nabla, mf.metric.raised(field.degree), nabla)
    return np.einsum("...lp,...lp->...", mf.metric.g_inv, paired)


def trace(k: np.ndarray, h: MetricField) -> np.ndarray:
    return np.einsum("...ij,...ij->...", h.metric.g_inv, k)


def gravitational_tensor(k: np.ndarray, h: MetricField) -> np.ndarray:
    """G(k) = k - ½ (tr_h k) h."""
    return k - 0.5 * trace(k, h)[..., None, None] * h.metric.g


def divergence(t: np.ndarray, h: MetricField, scheme: str = ORACLE_SCHEME) -> np.ndarray:
    """Div(t)_j = -h^il ∇_l t_ij for a symmetric 2-tensor field."""
    t = _full_field(t, h.grid, (DIM, DIM))
    gamma = christoffel(h, scheme)
    dt = gradient(t, h.grid, scheme)
    nabla = (
        dt
        - np.einsum("...mli,...mj->...lij", gamma, t)
        - np.einsum("...mlj,...im->...lij", gamma, t)
    )
    g_inv = _full_field(h.metric.g_inv, h.grid, (DIM, DIM))
    return -np.einsum("...il,...lij->...j", g_inv, nabla)


def divergence_via_trace(k: np.ndarray, h: MetricField, scheme: str = ORACLE_SCHEME) -> np.ndarray:
    """Div G(k) evaluated as Div(k) + ½ d(tr_h k)."""
    tr = _full_field(trace(k, h), h.grid, ())
    return divergence(k, h, scheme) + 0.5 * gradient(tr, h.grid, scheme)


def deturck_vector(h: MetricField, k: MetricField, scheme: str = ORACLE_SCHEME) -> np.ndarray:
    """X(h) = (k^-1 Div_h G(k))♯ as a vector field, shape grid + (7,)."""
    if k.grid != h.grid:
        raise ValueError("metric and background live on different grids")
    background = _full_field(k.metric.g, h.grid, (DIM, DIM))
    div = divergence(gravitational_tensor(background, h), h, scheme)
    try:
        return np.linalg.solve(background, div[..., None])[..., 0]
    except np.linalg.LinAlgError as exc:
        raise ValueError("background tensor is not invertible on 1-forms") from exc


def lie_derivative_metric(X: np.ndarray, mf: MetricField, scheme: str | None = None) -> np.ndarray:
    """(L_X g)_ij = X^m ∂_m g_ij + g_mj ∂_i X^m + g_im ∂_j X^m."""
    g = _full_field(mf.metric.g, mf.grid, (DIM, DIM))
    dg = gradient(g, mf.grid, scheme)
    dX = gradient(X, mf.grid, scheme)
    return (
        np.einsum("...m,...mij->...ij", X, dg)
        + np.einsum("...mj,...im->...ij", g, dX)
        + np.einsum("...im,...jm->...ij", g, dX)
    )
