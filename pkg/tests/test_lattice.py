import numpy as np
import pytest
from hypothesis import given, seed, settings
from hypothesis import strategies as st

from src.algorithms.initial import band_limited_form, fourier_mode, mode_eigenvalue, uniform_standard
from src.domain.exterior import DIM, AltForm, Metric
from src.domain.g2_fields import frame_field, metric_field
from src.domain.g2_pointwise import standard_phi
from src.domain.lattice import (
    Grid,
    LatticeField,
    MetricField,
    codiff,
    d,
    grid_mean,
    hodge_laplacian,
    highest_frequency_fraction,
    integrate_scalar,
    l2_inner,
    l2_norm_squared,
    partial,
    periods,
    tree_sum,
)
from src.domain.snapshot import (
    HEADER,
    decode_snapshot,
    encode_snapshot,
    read_snapshot,
    write_snapshot,
)
from src.errors import DegreeError, GridMismatchError, SnapshotFormatError
from tests.conftest import TWO_PI


def test_grid_validation():
    with pytest.raises(ValueError):
        Grid((8, 3, 1, 1, 1, 1, 1), (1.0,) * DIM)
    with pytest.raises(ValueError):
        Grid((8,) * 6, (1.0,) * 6)
    with pytest.raises(ValueError):
        Grid((8, 1, 1, 1, 1, 1, 1), (0.0,) + (1.0,) * 6)
    # three points are fine for central differences
    Grid((3, 1, 1, 1, 1, 1, 1), (1.0,) * DIM, "central")


def test_torus_geometry(plane_grid):
    assert plane_grid.shape == (8, 8, 1, 1, 1, 1, 1)
    assert plane_grid.active_axes == (0, 1)
    assert plane_grid.lengths[0] == pytest.approx(TWO_PI)
    assert plane_grid.first_eigenvalue() == pytest.approx(1.0)


def test_spectral_derivative_is_exact(line_grid):
    x = line_grid.coordinates(0)
    values = np.broadcast_to(np.sin(3.0 * x), line_grid.shape)
    assert np.allclose(partial(values, 0, line_grid), 3.0 * np.cos(3.0 * x), atol=1e-12)


def test_central_derivative_is_second_order():
    errors = []
    for n in (16, 32):
        grid = Grid.torus((n,), length=TWO_PI, scheme="central")
        x = grid.coordinates(0)
        values = np.broadcast_to(np.sin(x), grid.shape)
        errors.append(np.max(np.abs(partial(values, 0, grid) - np.cos(x))))
    assert errors[0] / errors[1] == pytest.approx(4.0, rel=0.05)


@pytest.mark.parametrize("scheme", ["spectral", "central"])
@pytest.mark.parametrize("degree", [0, 1, 2, 3])
def test_d_squared_vanishes(scheme, degree, rng):
    grid = Grid.torus((8, 8, 8), length=TWO_PI, scheme=scheme)
    field = band_limited_form(grid, degree, rng)
    assert d(d(field)).sup_norm() < 1e-11


@pytest.mark.parametrize("degree", [1, 2, 3])
def test_codiff_is_adjoint_of_d(degree, cube_grid, rng):
    alpha = band_limited_form(cube_grid, degree - 1, rng)
    beta = band_limited_form(cube_grid, degree, rng)
    mf = MetricField.flat(cube_grid)
    assert l2_inner(d(alpha), beta, mf) == pytest.approx(l2_inner(alpha, codiff(beta, mf), mf), rel=1e-9, abs=1e-8)


def test_codiff_adjoint_for_constant_metric(cube_grid, rng):
    g = np.eye(DIM) + 0.1 * np.ones((DIM, DIM))
    mf = MetricField(cube_grid, Metric.from_matrix(g))
    alpha = band_limited_form(cube_grid, 1, rng)
    beta = band_limited_form(cube_grid, 2, rng)
    assert l2_inner(d(alpha), beta, mf) == pytest.approx(l2_inner(alpha, codiff(beta, mf), mf), rel=1e-9, abs=1e-8)


@seed(21)
@settings(max_examples=12, deadline=None)
@given(st.integers(1, 3), st.integers(0, 2 ** 32 - 1))
def test_codiff_adjoint_for_structure_metric(degree, sample):
    rng = np.random.default_rng(sample)
    grid = Grid.torus((6, 6, 6), length=TWO_PI)
    phi = uniform_standard(grid) + band_limited_form(grid, 3, rng, amplitude=0.05)
    mf = metric_field(phi, frame_field(phi))
    assert not mf.is_uniform
    alpha = band_limited_form(grid, degree - 1, rng)
    beta = band_limited_form(grid, degree, rng)
    scale = np.sqrt(l2_norm_squared(d(alpha), mf) * l2_norm_squared(beta, mf))
    residual = l2_inner(d(alpha), beta, mf) - l2_inner(alpha, codiff(beta, mf), mf)
    assert abs(residual) <= 1e-10 * scale


@pytest.mark.parametrize("scheme", ["spectral", "central"])
def test_laplacian_eigenvalue_on_fourier_mode(scheme):
    grid = Grid.torus((8, 8), length=TWO_PI, scheme=scheme)
    mode = (1, 2)
    field = fourier_mode(grid, 2, mode, component=4)
    laplacian = hodge_laplacian(field, MetricField.flat(grid))
    expected = mode_eigenvalue(grid, mode)
    assert np.allclose(laplacian.values, expected * field.values, atol=1e-10)


def test_exact_forms_have_zero_periods(cube_grid, rng):
    exact = d(band_limited_form(cube_grid, 2, rng))
    result = periods(exact)
    assert np.max(np.abs(result.values)) < 1e-12
    assert result.d_residual < 1e-11


def test_uniform_field_periods(cube_grid):
    phi = LatticeField.uniform(cube_grid, standard_phi())
    assert np.allclose(grid_mean(phi), standard_phi().coeffs)
    assert d(phi).sup_norm() < 1e-12


def test_tree_sum_and_integration(cube_grid):
    ones = np.ones(cube_grid.shape)
    assert tree_sum(ones) == cube_grid.n_sites
    assert integrate_scalar(ones, cube_grid) == pytest.approx(TWO_PI ** 3)


def test_highest_frequency_fraction():
    grid = Grid.torus((12,), length=TWO_PI)
    assert highest_frequency_fraction(fourier_mode(grid, 0, (1,))) < 1e-20
    assert highest_frequency_fraction(fourier_mode(grid, 0, (5,))) == pytest.approx(1.0)


def test_field_arithmetic_checks(plane_grid, cube_grid):
    a = LatticeField.zeros(plane_grid, 1)
    with pytest.raises(GridMismatchError):
        a + LatticeField.zeros(cube_grid, 1)
    with pytest.raises(DegreeError):
        a + LatticeField.zeros(plane_grid, 2)
    with pytest.raises(ValueError):
        LatticeField(plane_grid, 1, np.zeros((8, 8, 7)))
    with pytest.raises(DegreeError):
        d(LatticeField.zeros(plane_grid, DIM))
    with pytest.raises(DegreeError):
        codiff(LatticeField.zeros(plane_grid, 0), MetricField.flat(plane_grid))


def test_snapshot_roundtrip_is_exact(tmp_path, plane_grid, rng):
    field = band_limited_form(plane_grid, 3, rng)
    path = write_snapshot(field, tmp_path / "nested" / "phi.g2f")
    loaded = read_snapshot(path)
    assert loaded.grid == field.grid
    assert loaded.degree == 3
    assert np.array_equal(loaded.values, field.values)
    assert path.stat().st_size == HEADER.size + field.values.size * 8


def test_snapshot_rejects_corruption(plane_grid, rng):
    data = encode_snapshot(band_limited_form(plane_grid, 1, rng))
    with pytest.raises(SnapshotFormatError):
        decode_snapshot(b"XXXX" + data[4:])
    with pytest.raises(SnapshotFormatError):
        decode_snapshot(data[:-8])
    with pytest.raises(SnapshotFormatError):
        decode_snapshot(data[:10])


def test_missing_snapshot(tmp_path):
    with pytest.raises(FileNotFoundError):
        read_snapshot(tmp_path / "missing.g2f")


def test_uniform_metric_field_is_flat(cube_grid):
    assert MetricField.flat(cube_grid).is_flat()
    scaled = MetricField(cube_grid, Metric.identity().scaled(2.0))
    assert scaled.is_uniform and not scaled.is_flat()
    with pytest.raises(GridMismatchError):
        MetricField(cube_grid, Metric.from_matrix(np.broadcast_to(np.eye(DIM), (2, DIM, DIM))))


def test_form_from_field(cube_grid):
    phi = LatticeField.uniform(cube_grid, standard_phi())
    assert isinstance(phi.as_form(), AltForm)
    assert phi.as_form().batch_shape == cube_grid.shape


def test_l2_norm_of_uniform_structure(cube_grid):
    phi = LatticeField.uniform(cube_grid, standard_phi())
    assert l2_inner(phi, phi, MetricField.flat(cube_grid)) == pytest.approx(7.0 * TWO_PI ** DIM)
