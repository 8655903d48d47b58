"""
Functionals and identity residuals sampled along a flow.

Every quantity that has two independent routes (volume by vol_phi and by
phi ∧ psi, Ricci by the metric oracle and from Δphi, D against C + ∫R) is
computed both ways so that the difference can be reported.
"""
from __future__ import annotations

import logging
from dataclasses import astuple, dataclass, fields
from typing import ClassVar, List, Optional, Sequence, Tuple

import numpy as np
import scipy.fft as sp_fft

from src.core import FlowState
from src.domain.curvature import (
    covariant_norm_squared,
    deturck_vector,
    gravitational_tensor,
    lie_derivative_metric,
    ricci_oracle,
    scalar_curvature,
)
from src.domain.exterior import AltForm, DIM, form_inner, hodge_star, wedge
from src.domain.g2_fields import (
    DIRICHLET_D_WEIGHTS,
    dirichlet_D,
    dirichlet_Dnu,
    frame_field,
    metric_field,
    psi_field,
    torsion_field,
    torsion_l2_norms,
    volume_functional,
    weighted_integral,
)
from src.domain.g2_pointwise import G2Frame, TorsionForms, decompose_variation, invert_i_map, j_map
from src.domain.lattice import (
    LatticeField,
    MetricField,
    Periods,
    codiff,
    d,
    grid_mean,
    highest_frequency_fraction,
    hodge_laplacian,
    l2_inner,
    l2_norm_squared,
)
from src.errors import DegreeError

logger = logging.getLogger(__name__)

CLOSED_TOLERANCE = 1e-8


def _format(value) -> str:
    """Integers as-is, floats with 17 significant digits so rows round-trip exactly."""
    if isinstance(value, (int, np.integer)):
        return str(int(value))
    return format(float(value), ".17g")


@dataclass
class DiagnosticsRecord:
    """One sample of a structure flow; every entry is a float except step."""

    t: float
    step: int
    volume: float
    energy_C: float
    energy_D: float
    energy_Dnu: float
    tau0_norm: float
    tau1_norm: float
    tau2_norm: float
    tau3_norm: float
    scalar_curvature_integral: float
    d_residual: float
    dstar_residual: float
    period_drift: float
    f0_identity_residual: float
    highest_frequency_fraction: float

    HEADER: ClassVar[Tuple[str, ...]] = ()

    @property
    def torsion_norms(self) -> Tuple[float, float, float, float]:
        return self.tau0_norm, self.tau1_norm, self.tau2_norm, self.tau3_norm

    def as_row(self) -> List[str]:
        return [_format(value) for value in astuple(self)]


@dataclass
class HeatRecord:
    """One sample of a heat flow."""

    t: float
    step: int
    energy: float
    distance_to_mean: float
    d_residual: float
    dstar_residual: float
    highest_frequency_fraction: float

    HEADER: ClassVar[Tuple[str, ...]] = ()

    def as_row(self) -> List[str]:
        return [_format(value) for value in astuple(self)]


DiagnosticsRecord.HEADER = tuple(f.name for f in fields(DiagnosticsRecord))
HeatRecord.HEADER = tuple(f.name for f in fields(HeatRecord))


def dirichlet_C(phi: LatticeField, frame: Optional[G2Frame] = None) -> float:
    """½ ∫ |∇phi|^2 vol_phi with Christoffel symbols of g_phi by central differences."""
    frame = frame if frame is not None else frame_field(phi)
    density = covariant_norm_squared(phi, metric_field(phi, frame))
    return 0.5 * weighted_integral(density, phi, frame)


def total_scalar_curvature(phi: LatticeField, frame: Optional[G2Frame] = None) -> float:
    """∫ R vol_phi from the metric oracle."""
    frame = frame if frame is not None else frame_field(phi)
    return weighted_integral(scalar_curvature(metric_field(phi, frame)), phi, frame)


def tau2_squared(frame: G2Frame, torsion: TorsionForms) -> np.ndarray:
    """|tau2|^2 per site in the metric of phi."""
    return form_inner(torsion.tau2, torsion.tau2, frame.metric)


def _tau2_quadratic(frame: G2Frame, torsion: TorsionForms) -> np.ndarray:
    """j_phi(*(tau2 ∧ tau2))."""
    square = hodge_star(wedge(torsion.tau2, torsion.tau2), frame.metric)
    return j_map(frame, square)


def metric_rate_from_torsion(frame: G2Frame, torsion: TorsionForms, ricci: np.ndarray) -> np.ndarray:
    """dg/dt along the Laplacian flow of a closed structure: -2Ric + (1/6)|tau2|^2 g + ¼ j(*(tau2 ∧ tau2))."""
    norm = tau2_squared(frame, torsion)[..., None, None]
    return -2.0 * ricci + norm * frame.metric.g / 6.0 + 0.25 * _tau2_quadratic(frame, torsion)


def metric_rate_from_variation(frame: G2Frame, dot_phi: AltForm) -> np.ndarray:
    """dg/dt = 2h of an arbitrary variation of phi."""
    return 2.0 * decompose_variation(frame, dot_phi).h


def ricci_from_laplacian(phi: LatticeField, frame: Optional[G2Frame] = None) -> np.ndarray:
    """
    Ricci tensor of a closed structure read off its Laplacian:
        Δphi = ½ i(h),  h = -Ric + (1/12)|tau2|^2 g + (1/8) j(*(tau2 ∧ tau2)).
    """
    frame = frame if frame is not None else frame_field(phi)
    tf = torsion_field(phi, frame)
    residual = tf.dphi.sup_norm()
    if residual > CLOSED_TOLERANCE:
        raise ValueError(f"structure is not closed (max |dphi| = {residual:.3e})")
    laplacian = d(codiff(phi, metric_field(phi, frame)))
    h = 2.0 * invert_i_map(frame, laplacian.as_form())
    norm = tau2_squared(frame, tf.torsion)[..., None, None]
    return -h + norm * frame.metric.g / 12.0 + 0.125 * _tau2_quadratic(frame, tf.torsion)


def laplacian_f0_residual(phi: LatticeField, frame: G2Frame, torsion: TorsionForms) -> float:
    """max over sites of |<Δphi, phi>/7 - |tau2|^2/7|, the Λ³_1 law on closed structures."""
    laplacian = hodge_laplacian(phi, metric_field(phi, frame)).as_form()
    coefficient = form_inner(laplacian, frame.phi, frame.metric) / 7.0
    return float(np.max(np.abs(coefficient - tau2_squared(frame, torsion) / 7.0)))


def volume_rate(phi: LatticeField, frame: G2Frame, dot_phi: LatticeField) -> float:
    """dVol/dt = (1/3) <dphi/dt, phi>_L2."""
    return l2_inner(dot_phi, phi, metric_field(phi, frame)) / 3.0


def stationary_implies_torsion_free(state: FlowState, rate: LatticeField) -> Tuple[float, float]:
    """(sup |rate|, ||tau2||_L2): a vanishing Laplacian-flow rate forces tau2 = 0."""
    torsion = torsion_field(state.phi, state.frame).torsion
    return rate.sup_norm(), torsion_l2_norms(state.phi, state.frame, torsion)[2]


def _heat_symbol(grid, axis: int) -> np.ndarray:
    n, h = grid.extents[axis], grid.spacings[axis]
    k = 2.0 * np.pi * sp_fft.fftfreq(n, d=h)
    if grid.scheme == "central":
        return np.sin(k * h) / h
    if n % 2 == 0:
        k[n // 2] = 0.0
    return k


def spectral_heat_reference(field: LatticeField, t: float, mf: Optional[MetricField] = None) -> LatticeField:
    """Exact solution of the discrete flat heat flow at time t: each mode decays as e^(-lambda t)."""
    mf = mf if mf is not None else MetricField.flat(field.grid)
    if not (mf.is_uniform and mf.is_flat()):
        raise ValueError("the heat reference needs the flat uniform metric")
    grid = field.grid
    axes = grid.active_axes
    if not axes:
        return field
    eigenvalue = np.zeros(grid.shape)
    for axis in axes:
        shape = [1] * DIM
        shape[axis] = grid.extents[axis]
        eigenvalue = eigenvalue + _heat_symbol(grid, axis).reshape(shape) ** 2
    spectrum = sp_fft.fftn(field.values, axes=axes)
    evolved = sp_fft.ifftn(spectrum * np.exp(-eigenvalue * t)[..., None], axes=axes)
    return LatticeField(grid, field.degree, evolved.real)


def heat_energy(field: LatticeField, mf: Optional[MetricField] = None) -> float:
    """½ ||d alpha||^2 + ½ ||δ alpha||^2."""
    mf = mf if mf is not None else MetricField.flat(field.grid)
    energy = 0.0
    if field.degree < DIM:
        energy += 0.5 * l2_norm_squared(d(field), mf)
    if field.degree > 0:
        energy += 0.5 * l2_norm_squared(codiff(field, mf), mf)
    return energy


def distance_to_mean(field: LatticeField, mf: Optional[MetricField] = None) -> float:
    mf = mf if mf is not None else MetricField.flat(field.grid)
    centred = LatticeField(field.grid, field.degree, field.values - grid_mean(field))
    return float(np.sqrt(l2_norm_squared(centred, mf)))


def compute_heat_record(state: FlowState) -> HeatRecord:
    field = state.field
    mf = MetricField.flat(field.grid)
    return HeatRecord(
        t=state.t,
        step=state.step,
        energy=heat_energy(field, mf),
        distance_to_mean=distance_to_mean(field, mf),
        d_residual=d(field).sup_norm() if field.degree < DIM else 0.0,
        dstar_residual=codiff(field, mf).sup_norm() if field.degree > 0 else 0.0,
        highest_frequency_fraction=highest_frequency_fraction(field),
    )


def reference_periods(state: FlowState, coflow: bool = False) -> Periods:
    """Periods the drift column is measured against: of psi for coflows, else of phi."""
    source = state.psi if coflow else state.phi
    return Periods(source.degree, grid_mean(source))


def compute_record(
    state: FlowState,
    reference: Periods,
    nu: Sequence[float] = (1.0, 1.0, 1.0, 1.0),
    coflow: bool = False,
) -> DiagnosticsRecord:
    phi, frame = state.phi, state.frame
    psi = state.psi if state.psi is not None else psi_field(phi, frame)
    tf = torsion_field(phi, frame, psi)
    norms = torsion_l2_norms(phi, frame, tf.torsion)
    source = psi if coflow else phi
    if source.degree != reference.degree:
        raise DegreeError("reference periods have the wrong degree")

    return DiagnosticsRecord(
        t=state.t,
        step=state.step,
        volume=volume_functional(phi, frame)[0],
        energy_C=dirichlet_C(phi, frame),
        energy_D=dirichlet_D(phi, frame, psi),
        energy_Dnu=dirichlet_Dnu(phi, nu, frame, tf.torsion),
        tau0_norm=norms[0],
        tau1_norm=norms[1],
        tau2_norm=norms[2],
        tau3_norm=norms[3],
        scalar_curvature_integral=total_scalar_curvature(phi, frame),
        d_residual=tf.dphi.sup_norm(),
        dstar_residual=tf.dpsi.sup_norm(),
        period_drift=float(np.max(np.abs(grid_mean(source) - reference.values))),
        f0_identity_residual=laplacian_f0_residual(phi, frame, tf.torsion),
        highest_frequency_fraction=highest_frequency_fraction(source),
    )


__all__ = [
    "CLOSED_TOLERANCE",
    "DIRICHLET_D_WEIGHTS",
    "DiagnosticsRecord",
    "HeatRecord",
    "compute_heat_record",
    "compute_record",
    "deturck_vector",
    "dirichlet_C",
    "dirichlet_D",
    "dirichlet_Dnu",
    "distance_to_mean",
    "gravitational_tensor",
    "heat_energy",
    "laplacian_f0_residual",
    "lie_derivative_metric",
    "metric_rate_from_torsion",
    "metric_rate_from_variation",
    "reference_periods",
    "ricci_from_laplacian",
    "ricci_oracle",
    "spectral_heat_reference",
    "stationary_implies_torsion_free",
    "tau2_squared",
    "total_scalar_curvature",
    "volume_functional",
    "volume_rate",
]
