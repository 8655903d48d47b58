import numpy as np
import pytest

from src.algorithms.flows import build_flow
from src.algorithms.initial import uniform_standard
from src.analysis.diagnostics import (
    DiagnosticsRecord,
    compute_record,
    dirichlet_C,
    laplacian_f0_residual,
    reference_periods,
    ricci_from_laplacian,
    spectral_heat_reference,
    stationary_implies_torsion_free,
    tau2_squared,
    total_scalar_curvature,
)
from src.core import FlowSpec
from src.domain.curvature import ricci_oracle
from src.domain.exterior import Metric
from src.domain.g2_fields import (
    DIRICHLET_D_WEIGHTS,
    dirichlet_D,
    dirichlet_Dnu,
    frame_field,
    metric_field,
    torsion_field,
    torsion_l2_norms,
    volume_functional,
)
from src.domain.lattice import Grid, LatticeField, MetricField
from tests.conftest import assert_order, closed_structure, coclosed_structure


def _state(phi):
    return build_flow(FlowSpec("laplacian")).initial_state(phi)


def _tau2_energy(phi, frame):
    return torsion_l2_norms(phi, frame, torsion_field(phi, frame).torsion)[2] ** 2


def test_record_of_the_torsion_free_structure():
    state = _state(uniform_standard(Grid.torus((4, 4))))
    record = compute_record(state, reference_periods(state))
    assert record.volume == pytest.approx(1.0)
    assert record.energy_C == 0.0
    assert abs(record.energy_D) < 1e-20
    assert abs(record.energy_Dnu) < 1e-20
    assert max(record.torsion_norms) < 1e-10
    assert abs(record.scalar_curvature_integral) < 1e-10
    assert record.period_drift == 0.0
    assert record.as_row()[:2] == ["0", "0"]
    assert DiagnosticsRecord.HEADER[:3] == ("t", "step", "volume")


def test_closed_structure_has_only_tau2():
    phi = closed_structure(16)
    frame = frame_field(phi)
    norms = torsion_l2_norms(phi, frame, torsion_field(phi, frame).torsion)
    assert norms[2] > 1e-2
    assert norms[0] < 1e-10
    assert norms[1] < 1e-5 * norms[2]
    assert norms[3] < 1e-5 * norms[2]


def test_dirichlet_energies_on_closed_structure():
    phi = closed_structure(16)
    frame = frame_field(phi)
    energy = dirichlet_D(phi, frame)
    assert energy == pytest.approx(0.5 * _tau2_energy(phi, frame), rel=1e-5)
    assert dirichlet_Dnu(phi, DIRICHLET_D_WEIGHTS, frame) == pytest.approx(energy, rel=1e-5)


def test_dirichlet_D_matches_weighted_energy_on_coclosed_structure():
    phi = coclosed_structure(16)
    frame = frame_field(phi)
    assert dirichlet_Dnu(phi, DIRICHLET_D_WEIGHTS, frame) == pytest.approx(dirichlet_D(phi, frame), rel=1e-5)


def test_volume_functional_agrees_both_ways():
    phi = coclosed_structure(16)
    by_volume, by_pairing = volume_functional(phi)
    assert by_volume == pytest.approx(by_pairing, rel=1e-12)


def test_curvature_oracle_converges_to_torsion_formulas():
    scalar_errors, c_errors = [], []
    for n in (16, 32, 64):
        phi = closed_structure(n)
        frame = frame_field(phi)
        tau2 = _tau2_energy(phi, frame)
        scalar_errors.append(abs(total_scalar_curvature(phi, frame) + 0.5 * tau2) / (0.5 * tau2))
        c_errors.append(abs(dirichlet_C(phi, frame) - tau2) / tau2)
    assert scalar_errors[-1] < 0.05 and c_errors[-1] < 0.05
    assert_order(scalar_errors, 1.8, floor=1e-9)
    assert_order(c_errors, 1.8, floor=1e-9)


def test_energy_difference_is_total_scalar_curvature():
    state = _state(closed_structure(32))
    record = compute_record(state, reference_periods(state), nu=DIRICHLET_D_WEIGHTS)
    assert record.energy_Dnu == pytest.approx(record.energy_D, rel=1e-5)
    assert record.energy_D - record.energy_C == pytest.approx(record.scalar_curvature_integral, rel=0.1)
    assert record.d_residual < 1e-10
    assert record.period_drift == 0.0


def test_ricci_from_laplacian_matches_oracle():
    errors = []
    for n in (16, 32, 64):
        phi = closed_structure(n)
        frame = frame_field(phi)
        oracle = ricci_oracle(metric_field(phi, frame))
        from_laplacian = ricci_from_laplacian(phi, frame)
        errors.append(np.max(np.abs(from_laplacian - oracle)) / np.max(np.abs(oracle)))
    assert errors[-1] < 0.05
    assert_order(errors, 1.8, floor=1e-9)


def test_ricci_from_laplacian_needs_closed_structure():
    with pytest.raises(ValueError):
        ricci_from_laplacian(coclosed_structure(16))


def test_f0_law_of_the_laplacian():
    errors = []
    for n in (8, 16, 32):
        phi = closed_structure(n)
        frame = frame_field(phi)
        torsion = torsion_field(phi, frame).torsion
        errors.append(laplacian_f0_residual(phi, frame, torsion) / np.max(tau2_squared(frame, torsion)))
    assert errors[-1] < 0.01
    assert_order(errors, 1.8, floor=1e-9)


def test_stationarity_diagnostic():
    flat = _state(uniform_standard(Grid.torus((4, 4))))
    rate = build_flow(FlowSpec("laplacian")).rate(flat)
    assert max(stationary_implies_torsion_free(flat, rate)) < 1e-10

    curved = _state(closed_structure(16))
    rate = build_flow(FlowSpec("laplacian")).rate(curved)
    sup_rate, tau2 = stationary_implies_torsion_free(curved, rate)
    assert sup_rate > 0.0 and tau2 > 0.0


def test_heat_reference_needs_flat_metric(line_grid):
    field = LatticeField.zeros(line_grid, 1)
    with pytest.raises(ValueError):
        spectral_heat_reference(field, 0.1, MetricField(line_grid, Metric.identity().scaled(2.0)))
    assert np.array_equal(spectral_heat_reference(field, 0.1).values, field.values)
