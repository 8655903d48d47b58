import numpy as np
import pytest
from hypothesis import given, seed, settings
from hypothesis import strategies as st

from src.analysis.validation import random_typed_torsion, run_validation
from src.domain.exterior import DIM, AltForm, hodge_star, interior, wedge
from src.domain.g2_pointwise import (
    G2Frame,
    assemble_torsion,
    decompose_coflow_rate,
    decompose_variation,
    i_map,
    invert_i_map,
    j_map,
    ji_constants,
    metric_from_phi,
    nearly_parallel_coflow_coefficient,
    phi_from_psi,
    project2,
    project3,
    random_positive_phi,
    standard_phi,
    torsion_from_derivatives,
    torsion_type_residuals,
)
from src.errors import PositivityError

PSI0_TERMS = {
    (4, 5, 6, 7): 1.0,
    (2, 3, 6, 7): 1.0,
    (2, 3, 4, 5): 1.0,
    (1, 3, 5, 7): 1.0,
    (1, 3, 4, 6): -1.0,
    (1, 2, 5, 6): -1.0,
    (1, 2, 4, 7): -1.0,
}


@pytest.fixture
def frames(rng):
    return G2Frame.from_phi(random_positive_phi(rng, (50,)))


def _random_symmetric(rng, batch):
    h = rng.standard_normal(batch + (DIM, DIM))
    return 0.5 * (h + np.swapaxes(h, -1, -2))


def test_standard_structure():
    frame = G2Frame.standard()
    assert np.allclose(frame.metric.g, np.eye(DIM), atol=1e-14)
    assert frame.vol.coeffs[0] == pytest.approx(1.0, abs=1e-14)
    assert np.allclose(frame.psi.coeffs, AltForm.from_terms(4, PSI0_TERMS).coeffs, atol=1e-14)
    assert wedge(frame.phi, frame.psi).coeffs[0] == pytest.approx(7.0)


def test_metric_scales_with_phi():
    # phi -> 8 phi scales g by 8^(2/3) = 4
    metric, vol = metric_from_phi(8.0 * standard_phi())
    assert np.allclose(metric.g, 4.0 * np.eye(DIM), atol=1e-12)
    assert vol.coeffs[0] == pytest.approx(4.0 ** 3.5)


def test_non_positive_forms_are_rejected():
    with pytest.raises(PositivityError):
        metric_from_phi(-1.0 * standard_phi())
    with pytest.raises(PositivityError) as info:
        metric_from_phi(AltForm.zero(3, (3,)))
    assert info.value.bad_sites == 3
    # a decomposable 3-form is degenerate
    with pytest.raises(PositivityError):
        metric_from_phi(AltForm.basis(1, 2, 3))


def test_i_and_j_on_the_structure(frames):
    assert np.allclose(i_map(frames, frames.metric.g).coeffs, 6.0 * frames.phi.coeffs, atol=1e-10)
    assert np.allclose(j_map(frames, frames.phi), 6.0 * frames.metric.g, atol=1e-10)


def test_ji_constants():
    a, b = ji_constants()
    assert a == pytest.approx(8.0, abs=1e-10)
    assert b == pytest.approx(4.0, abs=1e-10)


def test_kernel_of_j_is_seven_dimensional_part(frames, rng):
    X = rng.standard_normal((50, DIM))
    assert np.max(np.abs(j_map(frames, interior(X, frames.psi)))) < 1e-10


def test_invert_i_map(frames, rng):
    h = _random_symmetric(rng, (50,))
    assert np.allclose(invert_i_map(frames, i_map(frames, h)), h, atol=1e-10)


def test_two_form_types(frames, rng):
    beta = AltForm(2, rng.standard_normal((50, 21)))
    beta7, beta14 = project2(frames, beta)
    m = frames.metric
    assert np.allclose((beta7 + beta14).coeffs, beta.coeffs, atol=1e-12)
    assert np.allclose(wedge(beta14, frames.psi).coeffs, 0.0, atol=1e-10)
    assert np.allclose(wedge(beta14, frames.phi).coeffs, -hodge_star(beta14, m).coeffs, atol=1e-10)
    assert np.allclose(wedge(beta7, frames.phi).coeffs, 2.0 * hodge_star(beta7, m).coeffs, atol=1e-10)


def test_three_form_types(frames, rng):
    gamma = AltForm(3, rng.standard_normal((50, 35)))
    gamma1, gamma7, gamma27 = project3(frames, gamma)
    assert np.allclose((gamma1 + gamma7 + gamma27).coeffs, gamma.coeffs, atol=1e-12)
    # Λ³_27: gamma ∧ phi = 0 and gamma ∧ psi = 0
    assert np.allclose(wedge(gamma27, frames.phi).coeffs, 0.0, atol=1e-10)
    assert np.allclose(wedge(gamma27, frames.psi).coeffs, 0.0, atol=1e-10)
    assert np.allclose(j_map(frames, gamma7), 0.0, atol=1e-10)


def test_projectors_are_idempotent(frames, rng):
    gamma = AltForm(3, rng.standard_normal((50, 35)))
    for part in project3(frames, gamma):
        again = project3(frames, part)
        kept = [p for p in again if np.max(np.abs(p.coeffs)) > 1e-9]
        assert len(kept) <= 1


@seed(11)
@settings(max_examples=20, deadline=None)
@given(st.integers(0, 2 ** 32 - 1))
def test_torsion_roundtrip(sample):
    rng = np.random.default_rng(sample)
    frames = G2Frame.from_phi(random_positive_phi(rng, (20,)))
    torsion = random_typed_torsion(frames, rng)
    dphi, dpsi = assemble_torsion(frames, torsion)
    found = torsion_from_derivatives(frames, dphi, dpsi)
    assert np.allclose(found.tau0, torsion.tau0, atol=1e-9)
    assert np.allclose(found.tau1.coeffs, torsion.tau1.coeffs, atol=1e-9)
    assert np.allclose(found.tau2.coeffs, torsion.tau2.coeffs, atol=1e-9)
    assert np.allclose(found.tau3.coeffs, torsion.tau3.coeffs, atol=1e-9)
    assert found.residual < 1e-9
    assert max(torsion_type_residuals(frames, found)) < 1e-9


def test_variation_reassembles_both_ways(frames, rng):
    dot_phi = AltForm(3, rng.standard_normal((50, 35)))
    parts = decompose_variation(frames, dot_phi)
    assert np.allclose(parts.reassemble(frames).coeffs, dot_phi.coeffs, atol=1e-10)
    assert np.allclose(parts.reassemble_metric_form(frames).coeffs, dot_phi.coeffs, atol=1e-10)


def test_metric_variation_matches_finite_difference(rng):
    phi = random_positive_phi(rng)
    dot_phi = AltForm(3, rng.standard_normal(35))
    frame = G2Frame.from_phi(phi)
    eps = 1e-6
    plus, _ = metric_from_phi(phi + eps * dot_phi)
    minus, _ = metric_from_phi(phi - eps * dot_phi)
    numeric = (plus.g - minus.g) / (2.0 * eps)
    assert np.allclose(numeric, 2.0 * decompose_variation(frame, dot_phi).h, atol=1e-6)


def test_coflow_rate_decomposition_inverts_psi_variation(frames, rng):
    dot_psi = AltForm(4, rng.standard_normal((50, 35)))
    parts = decompose_coflow_rate(frames, dot_psi)
    assert np.allclose(parts.psi_variation(frames).coeffs, dot_psi.coeffs, atol=1e-10)


def test_phi_from_psi_recovers_structure(rng):
    phi = random_positive_phi(rng, (10,))
    psi = G2Frame.from_phi(phi).psi
    frame = phi_from_psi(psi, guess=AltForm(3, np.broadcast_to(standard_phi().coeffs, (10, 35))))
    assert np.allclose(frame.phi.coeffs, phi.coeffs, atol=1e-10)


def test_nearly_parallel_coefficient():
    assert nearly_parallel_coflow_coefficient(2.0, 5.0) == pytest.approx(0.0)
    assert nearly_parallel_coflow_coefficient(2.0, 7.0) == pytest.approx(4.0)


def test_validation_suite_passes():
    report = run_validation(seed=3)
    assert report.passed, report.lines()
    assert report.a + 7.0 * report.b == pytest.approx(36.0)


def test_corrupted_star_is_detected():
    report = run_validation(seed=3, corrupt_star_degree=0)
    assert not report.passed
    assert report.failures == ["star_involution"]
