"""G2 structures as lattice fields: frames, torsion, volume and the Dirichlet energies."""
from __future__ import annotations

from dataclasses import dataclass
from typing import Optional, Sequence, Tuple

import numpy as np

from src.domain.exterior import form_inner, hodge_star, wedge
from src.domain.g2_pointwise import G2Frame, TorsionForms, torsion_from_derivatives
from src.domain.lattice import (
    LatticeField,
    MetricField,
    d,
    integrate_scalar,
    integrate_top,
    pointwise_inner,
)
from src.errors import DegreeError

# D = D_nu with these weights, from |a ∧ phi|^2 = 4|a|^2 and |a ∧ psi|^2 = 3|a|^2
DIRICHLET_D_WEIGHTS: Tuple[float, float, float, float] = (7.0, 84.0, 1.0, 1.0)


def frame_field(phi: LatticeField) -> G2Frame:
    if phi.degree != 3:
        raise DegreeError("a G2 structure is a 3-form field")
    return G2Frame.from_phi(phi.as_form())


def metric_field(phi: LatticeField, frame: G2Frame) -> MetricField:
    return MetricField(phi.grid, frame.metric)


def psi_field(phi: LatticeField, frame: G2Frame) -> LatticeField:
    return LatticeField.from_form(phi.grid, frame.psi)


@dataclass
class TorsionField:
    """Torsion of a structure field together with the derivatives it came from."""

    torsion: TorsionForms
    dphi: LatticeField
    dpsi: LatticeField


def torsion_field(
    phi: LatticeField,
    frame: Optional[G2Frame] = None,
    psi: Optional[LatticeField] = None,
) -> TorsionField:
    frame = frame if frame is not None else frame_field(phi)
    psi = psi if psi is not None else psi_field(phi, frame)
    dphi = d(phi)
    dpsi = d(psi)
    torsion = torsion_from_derivatives(frame, dphi.as_form(), dpsi.as_form())
    return TorsionField(torsion, dphi, dpsi)


def volume_functional(phi: LatticeField, frame: Optional[G2Frame] = None) -> Tuple[float, float]:
    """(∫ vol_phi, 1/7 ∫ phi ∧ *phi); the two agree for any positive field."""
    frame = frame if frame is not None else frame_field(phi)
    by_volume = integrate_top(LatticeField.from_form(phi.grid, frame.vol))
    by_pairing = integrate_top(LatticeField.from_form(phi.grid, wedge(frame.phi, frame.psi))) / 7.0
    return by_volume, by_pairing


def weighted_integral(density: np.ndarray, phi: LatticeField, frame: G2Frame) -> float:
    """∫ density vol_phi."""
    return integrate_scalar(density * np.broadcast_to(frame.vol_scale, phi.grid.shape), phi.grid)


def torsion_l2_norms(
    phi: LatticeField,
    frame: G2Frame,
    torsion: TorsionForms,
) -> Tuple[float, float, float, float]:
    return tuple(
        float(np.sqrt(max(weighted_integral(np.broadcast_to(sq, phi.grid.shape), phi, frame), 0.0)))
        for sq in torsion.norms_squared(frame)
    )


def dirichlet_D(
    phi: LatticeField,
    frame: Optional[G2Frame] = None,
    psi: Optional[LatticeField] = None,
) -> float:
    """½ ∫ |dphi|^2 + |d*phi|^2 vol_phi, evaluated from the derivatives directly."""
    frame = frame if frame is not None else frame_field(phi)
    psi = psi if psi is not None else psi_field(phi, frame)
    mf = metric_field(phi, frame)
    dphi, dpsi = d(phi), d(psi)
    density = pointwise_inner(dphi, dphi, mf) + pointwise_inner(dpsi, dpsi, mf)
    return 0.5 * weighted_integral(density, phi, frame)


def dirichlet_Dnu(
    phi: LatticeField,
    nu: Sequence[float],
    frame: Optional[G2Frame] = None,
    torsion: Optional[TorsionForms] = None,
) -> float:
    """sum_i (nu_i / 2) ∫ |tau_i|^2 vol_phi."""
    if len(nu) != 4:
        raise ValueError("D_nu needs four weights")
    frame = frame if frame is not None else frame_field(phi)
    torsion = torsion if torsion is not None else torsion_field(phi, frame).torsion
    density = sum(
        0.5 * weight * np.broadcast_to(sq, phi.grid.shape)
        for weight, sq in zip(nu, torsion.norms_squared(frame))
    )
    return weighted_integral(density, phi, frame)


def scalar_torsion(phi: LatticeField, frame: G2Frame) -> np.ndarray:
    """tau0 = <*dphi, phi> / 7 per site, which needs dphi only."""
    s = hodge_star(d(phi).as_form(), frame.metric)
    return form_inner(s, frame.phi, frame.metric) / 7.0
