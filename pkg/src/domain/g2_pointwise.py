"""
Pointwise algebra of G2 structures.

Conventions:
    phi_0 = e123 + e145 + e167 + e246 - e257 - e347 - e356
    psi_0 = *phi_0 = e4567 + e2367 + e2345 + e1357 - e1346 - e1256 - e1247
    omega_i = e_i ⌟ phi

    i(h) = 2 sum_ij h_ij e^i ∧ ((g^-1 e^j) ⌟ phi),   i(g) = 6 phi
    j(gamma)_ij = (omega_i ∧ omega_j ∧ gamma)_top / sqrt(det g),   j(phi) = 6 g

A variation is written dphi = 3 f0 phi + *(f1 ∧ phi) + f3 = ½ i(h) + X ⌟ psi
with h = f0 g + ¼ j(f3) the half-rate of the metric and X = -(f1)♯.

Every function accepts batched forms (leading axes are points).
"""
from __future__ import annotations

import logging
from dataclasses import dataclass
from functools import cached_property, lru_cache
from typing import Optional, Tuple

import numpy as np

from src.domain.exterior import (
    DIM,
    AltForm,
    Metric,
    form_inner,
    hodge_star,
    hodge_star_matrix,
    interior,
    volume_form,
    wedge,
    wedge_operator,
)
from src.errors import (
    ConditioningError,
    ConvergenceError,
    DegreeError,
    PositivityError,
)

logger = logging.getLogger(__name__)

MAX_CONDITION = 1e8

PHI0_TERMS = {
    (1, 2, 3): 1.0,
    (1, 4, 5): 1.0,
    (1, 6, 7): 1.0,
    (2, 4, 6): 1.0,
    (2, 5, 7): -1.0,
    (3, 4, 7): -1.0,
    (3, 5, 6): -1.0,
}


def standard_phi() -> AltForm:
    return AltForm.from_terms(3, PHI0_TERMS)


def _solve(matrix: np.ndarray, rhs: np.ndarray) -> np.ndarray:
    return np.linalg.solve(matrix, rhs[..., None])[..., 0]


def _contractions(phi: AltForm) -> np.ndarray:
    """omega_i = e_i ⌟ phi stacked along axis -2, shape (..., 7, 21)."""
    lifted = AltForm(3, phi.coeffs[..., None, :])
    return interior(np.eye(DIM), lifted).coeffs


def _pair_top(omega: np.ndarray, gamma: AltForm) -> np.ndarray:
    """Top coefficients of omega_i ∧ omega_j ∧ gamma, shape (..., 7, 7)."""
    with_gamma = wedge(AltForm(2, omega), AltForm(3, gamma.coeffs[..., None, :]))
    top = wedge(
        AltForm(2, omega[..., :, None, :]),
        AltForm(5, with_gamma.coeffs[..., None, :, :]),
    )
    out = top.coeffs[..., 0]
    return 0.5 * (out + np.swapaxes(out, -1, -2))


def metric_from_phi(phi: AltForm) -> Tuple[Metric, AltForm]:
    """
    Induced metric and volume form of a positive 3-form.

    B_ij = (omega_i ∧ omega_j ∧ phi)_top equals 6 g_ij sqrt(det g), so
    g = B / (6 (det B / 6^7)^(1/9)).
    """
    if phi.degree != 3:
        raise DegreeError("metric_from_phi needs a 3-form")
    candidate = _pair_top(_contractions(phi), phi)
    det = np.linalg.det(candidate)
    bad = ~(det > 0.0)
    if np.any(bad):
        raise PositivityError(
            f"3-form is not positive at {int(np.count_nonzero(bad))} point(s)",
            bad_sites=int(np.count_nonzero(bad)),
        )
    scale = 6.0 * (det / 6.0 ** 7) ** (1.0 / 9.0)
    metric = Metric.from_matrix(candidate / scale[..., None, None])
    condition = float(np.max(metric.condition_number()))
    if condition > MAX_CONDITION:
        raise ConditioningError(
            f"induced metric condition number {condition:.3e} exceeds {MAX_CONDITION:.0e}",
            condition=condition,
        )
    return metric, volume_form(metric)


@dataclass(frozen=True)
class G2Frame:
    """A positive 3-form with its induced metric, dual 4-form and volume form."""

    phi: AltForm
    metric: Metric
    psi: AltForm
    vol: AltForm

    @classmethod
    def from_phi(cls, phi: AltForm) -> "G2Frame":
        metric, vol = metric_from_phi(phi)
        return cls(phi=phi, metric=metric, psi=hodge_star(phi, metric), vol=vol)

    @classmethod
    def standard(cls) -> "G2Frame":
        return cls.from_phi(standard_phi())

    @property
    def vol_scale(self) -> np.ndarray:
        return self.metric.vol_scale

    @cached_property
    def omega(self) -> np.ndarray:
        return _contractions(self.phi)

    @cached_property
    def seven_map3(self) -> np.ndarray:
        """Columns *(e^m ∧ phi): the embedding of 1-forms onto Λ³_7."""
        images = wedge(AltForm(1, np.eye(DIM)), AltForm(3, self.phi.coeffs[..., None, :]))
        stars = np.einsum("...ij,...mj->...mi", hodge_star_matrix(4, self.metric), images.coeffs)
        return np.swapaxes(stars, -1, -2)

    @cached_property
    def seven_map2(self) -> np.ndarray:
        """Columns (g^-1 e^m) ⌟ phi = *(e^m ∧ psi): the embedding of 1-forms onto Λ²_7."""
        raised = np.einsum("...jm,...jc->...mc", self.metric.g_inv, self.omega)
        return np.swapaxes(raised, -1, -2)

    @cached_property
    def twist2(self) -> np.ndarray:
        """Matrix of beta -> *(beta ∧ phi) on 2-forms (eigenvalues 2 on Λ²_7, -1 on Λ²_14)."""
        return hodge_star_matrix(5, self.metric) @ wedge_operator(self.phi, 2)

    @cached_property
    def _normal3(self) -> np.ndarray:
        a7 = self.seven_map3
        return np.swapaxes(a7, -1, -2) @ self.metric.raised(3) @ a7


@dataclass
class TorsionForms:
    """
    Torsion of a G2 structure:
        dphi = tau0 psi + 3 tau1 ∧ phi + *tau3
        dpsi = 4 tau1 ∧ psi + tau2 ∧ phi

    Attributes:
        tau0:      Scalar (or per-point array).
        tau1:      1-form.
        tau2:      2-form in Λ²_14.
        tau3:      3-form in Λ³_27.
        residual:  Max coefficient error of the reassembled (dphi, dpsi).
        condition: Condition number of the tau1 normal equations.
    """

    tau0: np.ndarray
    tau1: AltForm
    tau2: AltForm
    tau3: AltForm
    residual: float = 0.0
    condition: float = 1.0

    def norms_squared(self, frame: G2Frame) -> Tuple[np.ndarray, np.ndarray, np.ndarray, np.ndarray]:
        m = frame.metric
        return (
            np.asarray(self.tau0) ** 2,
            form_inner(self.tau1, self.tau1, m),
            form_inner(self.tau2, self.tau2, m),
            form_inner(self.tau3, self.tau3, m),
        )


@dataclass
class FlowDecomposition:
    """
    Type decomposition of a 3-form variation.

    Attributes:
        f0: Scalar part, dphi ⊃ 3 f0 phi.
        f1: 1-form part, dphi ⊃ *(f1 ∧ phi).
        f3: Λ³_27 part.
        h:  Half-rate of the metric, dg = 2h.
        X:  Vector field with X ⌟ psi = *(f1 ∧ phi).
    """

    f0: np.ndarray
    f1: AltForm
    f3: AltForm
    h: np.ndarray
    X: np.ndarray

    def reassemble(self, frame: G2Frame) -> AltForm:
        return (
            (3.0 * np.asarray(self.f0)) * frame.phi
            + hodge_star(wedge(self.f1, frame.phi), frame.metric)
            + self.f3
        )

    def reassemble_metric_form(self, frame: G2Frame) -> AltForm:
        return 0.5 * i_map(frame, self.h) + interior(self.X, frame.psi)

    def psi_variation(self, frame: G2Frame) -> AltForm:
        """The induced rate of psi: 4 f0 psi + f1 ∧ phi - *f3."""
        return (
            (4.0 * np.asarray(self.f0)) * frame.psi
            + wedge(self.f1, frame.phi)
            - hodge_star(self.f3, frame.metric)
        )


def _check_symmetric(h: np.ndarray) -> np.ndarray:
    h = np.asarray(h, dtype=float)
    if h.shape[-2:] != (DIM, DIM):
        raise ValueError(f"symmetric tensor must have shape (..., 7, 7), got {h.shape}")
    scale = max(1.0, float(np.max(np.abs(h)))) if h.size else 1.0
    if np.max(np.abs(h - np.swapaxes(h, -1, -2)), initial=0.0) > 1e-12 * scale:
        raise ValueError("tensor must be symmetric")
    return h


def i_map(frame: G2Frame, h: np.ndarray) -> AltForm:
    h = _check_symmetric(h)
    mixed = h @ frame.metric.g_inv
    chi = np.einsum("...im,...mc->...ic", mixed, frame.omega)
    terms = wedge(AltForm(1, np.eye(DIM)), AltForm(2, chi))
    return AltForm(3, 2.0 * terms.coeffs.sum(axis=-2))


def j_map(frame: G2Frame, gamma: AltForm) -> np.ndarray:
    if gamma.degree != 3:
        raise DegreeError("j_map needs a 3-form")
    return _pair_top(frame.omega, gamma) / frame.vol_scale[..., None, None]


@lru_cache(maxsize=None)
def ji_constants() -> Tuple[float, float]:
    """
    Constants (a, b) with j(i(h)) = a h + b tr_g(h) g, calibrated at the
    standard point. i(g) = 6 phi and j(phi) = 6 g force a + 7 b = 36.
    """
    frame = G2Frame.standard()
    traceless = np.zeros((DIM, DIM))
    traceless[0, 0], traceless[1, 1] = 1.0, -1.0
    a = float(j_map(frame, i_map(frame, traceless))[0, 0])
    full = float(j_map(frame, i_map(frame, np.eye(DIM)))[0, 0])
    b = (full - a) / DIM
    if abs(a + DIM * b - 36.0) > 1e-10:
        raise RuntimeError(f"j∘i calibration violates a + 7b = 36: a={a}, b={b}")
    logger.debug("calibrated j∘i constants a=%.15g b=%.15g", a, b)
    return a, b


def invert_i_map(frame: G2Frame, gamma: AltForm) -> np.ndarray:
    """Symmetric h with i(h) equal to the Λ³_1 ⊕ Λ³_27 part of gamma."""
    a, b = ji_constants()
    image = j_map(frame, gamma)
    trace = np.einsum("...ij,...ij->...", frame.metric.g_inv, image) / (a + DIM * b)
    return (image - b * trace[..., None, None] * frame.metric.g) / a


def project2(frame: G2Frame, beta: AltForm) -> Tuple[AltForm, AltForm]:
    if beta.degree != 2:
        raise DegreeError("project2 needs a 2-form")
    twisted = np.einsum("...ij,...j->...i", frame.twist2, beta.coeffs)
    beta7 = AltForm(2, (beta.coeffs + twisted) / 3.0)
    beta14 = AltForm(2, (2.0 * beta.coeffs - twisted) / 3.0)
    return beta7, beta14


def seven_coefficients3(frame: G2Frame, gamma: AltForm) -> np.ndarray:
    """The 1-form f with gamma7 = *(f ∧ phi), by metric least squares."""
    a7 = frame.seven_map3
    rhs = np.einsum("...ji,...jk,...k->...i", a7, frame.metric.raised(3), gamma.coeffs)
    return _solve(frame._normal3, rhs)


def project3(frame: G2Frame, gamma: AltForm) -> Tuple[AltForm, AltForm, AltForm]:
    if gamma.degree != 3:
        raise DegreeError("project3 needs a 3-form")
    gamma1 = (form_inner(gamma, frame.phi, frame.metric) / 7.0) * frame.phi
    f1 = seven_coefficients3(frame, gamma)
    gamma7 = AltForm(3, np.einsum("...ij,...j->...i", frame.seven_map3, f1))
    gamma27 = gamma - gamma1 - gamma7
    return gamma1, gamma7, gamma27


def assemble_torsion(frame: G2Frame, torsion: TorsionForms) -> Tuple[AltForm, AltForm]:
    """(dphi, dpsi) predicted by a torsion quadruple."""
    dphi = (
        np.asarray(torsion.tau0) * frame.psi
        + 3.0 * wedge(torsion.tau1, frame.phi)
        + hodge_star(torsion.tau3, frame.metric)
    )
    dpsi = 4.0 * wedge(torsion.tau1, frame.psi) + wedge(torsion.tau2, frame.phi)
    return dphi, dpsi


def torsion_from_derivatives(frame: G2Frame, dphi: AltForm, dpsi: AltForm) -> TorsionForms:
    """
    Read the torsion forms off dphi and dpsi.

    With s = *dphi = tau0 phi + 3 *(tau1 ∧ phi) + tau3 and
    t = *dpsi = 4 (tau1)♯ ⌟ phi - tau2, tau0, tau3 and tau2 come from type
    projections and tau1 from joint normal equations on the Λ³_7 part of s
    and the Λ²_7 part of t. The reassembly residual is reported.
    """
    if dphi.degree != 4 or dpsi.degree != 5:
        raise DegreeError("torsion extraction needs a 4-form and a 5-form")
    m = frame.metric
    s = hodge_star(dphi, m)
    t = hodge_star(dpsi, m)

    tau0 = form_inner(s, frame.phi, m) / 7.0
    _, s7, s27 = project3(frame, s)
    t7, t14 = project2(frame, t)

    a7, a2 = frame.seven_map3, frame.seven_map2
    m3, m2 = m.raised(3), m.raised(2)
    normal = 9.0 * (np.swapaxes(a7, -1, -2) @ m3 @ a7) + 16.0 * (np.swapaxes(a2, -1, -2) @ m2 @ a2)
    rhs = 3.0 * np.einsum("...ji,...jk,...k->...i", a7, m3, s7.coeffs) + 4.0 * np.einsum(
        "...ji,...jk,...k->...i", a2, m2, t7.coeffs
    )
    tau1 = AltForm(1, _solve(normal, rhs))
    condition = float(np.max(np.linalg.cond(normal)))
    if condition > MAX_CONDITION:
        logger.warning("torsion inversion is ill-conditioned (cond=%.3e)", condition)

    torsion = TorsionForms(tau0=tau0, tau1=tau1, tau2=-t14, tau3=s27, condition=condition)
    fit_phi, fit_psi = assemble_torsion(frame, torsion)
    torsion.residual = float(
        max(
            np.max(np.abs(fit_phi.coeffs - dphi.coeffs)),
            np.max(np.abs(fit_psi.coeffs - dpsi.coeffs)),
        )
    )
    return torsion


def torsion_type_residuals(frame: G2Frame, torsion: TorsionForms) -> Tuple[float, float, float]:
    """Max |tau2 ∧ psi|, |tau3 ∧ phi|, |tau3 ∧ psi| (all zero for well-typed torsion)."""
    return (
        float(np.max(np.abs(wedge(torsion.tau2, frame.psi).coeffs))),
        float(np.max(np.abs(wedge(torsion.tau3, frame.phi).coeffs))),
        float(np.max(np.abs(wedge(torsion.tau3, frame.psi).coeffs))),
    )


def decompose_variation(frame: G2Frame, dot_phi: AltForm) -> FlowDecomposition:
    if dot_phi.degree != 3:
        raise DegreeError("decompose_variation needs a 3-form")
    f0 = form_inner(dot_phi, frame.phi, frame.metric) / 21.0
    f1_coeffs = seven_coefficients3(frame, dot_phi)
    gamma7 = AltForm(3, np.einsum("...ij,...j->...i", frame.seven_map3, f1_coeffs))
    f3 = dot_phi - (3.0 * np.asarray(f0)) * frame.phi - gamma7
    return _decomposition(frame, f0, AltForm(1, f1_coeffs), f3)


def decompose_coflow_rate(frame: G2Frame, dot_psi: AltForm) -> FlowDecomposition:
    """
    Decomposition (f0, f1, f3) of the 3-form rate inducing a given 4-form rate,
    read off *dpsi = 4 f0 phi + *(f1 ∧ phi) - f3.
    """
    if dot_psi.degree != 4:
        raise DegreeError("decompose_coflow_rate needs a 4-form")
    sigma = hodge_star(dot_psi, frame.metric)
    f0 = form_inner(sigma, frame.phi, frame.metric) / 28.0
    f1_coeffs = seven_coefficients3(frame, sigma)
    gamma7 = AltForm(3, np.einsum("...ij,...j->...i", frame.seven_map3, f1_coeffs))
    f3 = (4.0 * np.asarray(f0)) * frame.phi + gamma7 - sigma
    return _decomposition(frame, f0, AltForm(1, f1_coeffs), f3)


def _decomposition(frame: G2Frame, f0: np.ndarray, f1: AltForm, f3: AltForm) -> FlowDecomposition:
    m = frame.metric
    h = np.asarray(f0)[..., None, None] * m.g + 0.25 * j_map(frame, f3)
    X = -np.einsum("...ij,...j->...i", m.g_inv, f1.coeffs)
    return FlowDecomposition(f0=f0, f1=f1, f3=f3, h=h, X=X)


def phi_from_psi(
    psi: AltForm,
    guess: AltForm,
    tolerance: float = 1e-12,
    max_iterations: int = 30,
) -> G2Frame:
    """
    Recover the positive 3-form whose dual 4-form is psi, by Newton iteration
    from a nearby guess. The linear step inverts dpsi = 4 f0 psi + f1 ∧ phi - *f3.
    """
    if psi.degree != 4:
        raise DegreeError("phi_from_psi needs a 4-form")
    target = tolerance * max(1.0, float(np.max(np.abs(psi.coeffs))))
    phi = guess
    error = float("inf")
    for iteration in range(max_iterations):
        frame = G2Frame.from_phi(phi)
        residual = AltForm(4, psi.coeffs - frame.psi.coeffs)
        error = float(np.max(np.abs(residual.coeffs)))
        if error <= target:
            logger.debug("phi_from_psi converged in %d iteration(s), error %.3e", iteration, error)
            return frame
        phi = phi + decompose_coflow_rate(frame, residual).reassemble(frame)
    raise ConvergenceError(
        f"phi_from_psi did not converge in {max_iterations} iterations (error {error:.3e})"
    )


def nearly_parallel_coflow_coefficient(tau0: float, c: float) -> float:
    """tau0^2 + tau0 (c - 7/2 tau0) = tau0 (c - 5/2 tau0)."""
    return tau0 ** 2 + tau0 * (c - 3.5 * tau0)


def random_positive_phi(
    rng: np.random.Generator,
    batch: Tuple[int, ...] = (),
    spread: float = 0.05,
    base: Optional[AltForm] = None,
) -> AltForm:
    """Small random perturbations of phi_0 (positive for spread well below 1)."""
    base = base if base is not None else standard_phi()
    noise = rng.standard_normal(batch + (base.coeffs.shape[-1],))
    return AltForm(3, base.coeffs + spread * noise)
