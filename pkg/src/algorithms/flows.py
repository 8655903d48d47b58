"""
Right-hand sides of the flows and the Flow classes that wrap them.

Structure flows evolve phi; their rates are assembled as exact forms
(d of something) whenever the flow is meant to stay in a cohomology class,
so periods are preserved by construction. Coflows evolve psi and recover
phi after every stage.
"""
from __future__ import annotations

import logging
from typing import Optional, Sequence

import numpy as np

from src.core import Flow, FlowSpec, FlowState
from src.domain.curvature import deturck_vector
from src.domain.exterior import interior
from src.domain.g2_fields import (
    dirichlet_Dnu,
    frame_field,
    psi_field,
    scalar_torsion,
)
from src.domain.g2_pointwise import decompose_coflow_rate, phi_from_psi
from src.domain.lattice import (
    LatticeField,
    MetricField,
    codiff,
    d,
    grid_mean,
    hodge_laplacian,
)
from src.errors import DegreeError, DofBudgetError, NonFiniteError

logger = logging.getLogger(__name__)

DIRICHLET_MAX_DOF = 5000
DIRICHLET_RELATIVE_STEP = 1e-6


def _flat_metric(field: LatticeField, mf: Optional[MetricField]) -> MetricField:
    mf = mf if mf is not None else MetricField.flat(field.grid)
    if not (mf.is_uniform and mf.is_flat()):
        raise ValueError("heat flow is defined against the flat uniform metric")
    return mf


def rhs_heat(field: LatticeField, mf: Optional[MetricField] = None) -> LatticeField:
    """-Δ field for the flat metric."""
    return -hodge_laplacian(field, _flat_metric(field, mf))


def rhs_heat_modified(
    field: LatticeField,
    lambda1: float,
    mf: Optional[MetricField] = None,
    tolerance: float = 1e-10,
) -> LatticeField:
    """-Δf + lambda1 f, for functions with zero average."""
    if field.degree != 0:
        raise DegreeError("the modified heat flow acts on functions")
    mean = float(grid_mean(field)[0])
    if abs(mean) > tolerance * max(1.0, field.sup_norm()):
        raise ValueError(f"modified heat flow needs a zero-mean function, got mean {mean:.3e}")
    return rhs_heat(field, mf) + field.scaled(lambda1)


def structure_metric(state: FlowState) -> MetricField:
    return MetricField(state.grid, state.frame.metric)


def rhs_laplacian(state: FlowState, exact: bool = True) -> LatticeField:
    """
    Δ_phi phi. With exact=True only d(δphi) is kept, which equals the full
    Laplacian on closed structures and is exact.
    """
    mf = structure_metric(state)
    if not exact:
        return hodge_laplacian(state.phi, mf)
    return d(codiff(state.phi, mf))


def deturck_field(state: FlowState, background: MetricField) -> np.ndarray:
    return deturck_vector(structure_metric(state), background)


def rhs_laplacian_deturck(state: FlowState, background: MetricField) -> LatticeField:
    """Δ_phi phi + d(X ⌟ phi) with X the DeTurck vector field against the background."""
    X = deturck_field(state, background)
    gauge = LatticeField.from_form(state.grid, interior(X, state.phi.as_form()))
    return rhs_laplacian(state) + d(gauge)


def _psi(state: FlowState) -> LatticeField:
    return state.psi if state.psi is not None else psi_field(state.phi, state.frame)


def coflow_psi_rate(state: FlowState, c: Optional[float] = None) -> LatticeField:
    """
    Exact 4-form rate d(δpsi), plus d((c - 7/2 tau0) phi) for the modified coflow.
    """
    mf = structure_metric(state)
    rate = d(codiff(_psi(state), mf))
    if c is not None:
        tau0 = scalar_torsion(state.phi, state.frame)
        rate = rate + d(state.phi.scaled(c - 3.5 * tau0))
    return rate


def _phi_rate_from_psi_rate(state: FlowState, psi_rate: LatticeField) -> LatticeField:
    decomposition = decompose_coflow_rate(state.frame, psi_rate.as_form())
    return LatticeField.from_form(state.grid, decomposition.reassemble(state.frame))


def rhs_coflow(state: FlowState) -> LatticeField:
    return _phi_rate_from_psi_rate(state, coflow_psi_rate(state))


def rhs_modified_coflow(state: FlowState, c: float) -> LatticeField:
    return _phi_rate_from_psi_rate(state, coflow_psi_rate(state, c))


def dirichlet_gradient(phi: LatticeField, nu: Sequence[float]) -> LatticeField:
    """
    Gradient of D_nu with respect to every lattice coefficient of phi, by
    central differences with step 1e-6 * max|phi|.
    """
    dof = phi.values.size
    if dof > DIRICHLET_MAX_DOF:
        raise DofBudgetError(
            f"numerical Dirichlet gradient over {dof} degrees of freedom exceeds "
            f"{DIRICHLET_MAX_DOF}; shrink the grid"
        )
    step = DIRICHLET_RELATIVE_STEP * phi.sup_norm()
    flat = phi.values.reshape(-1)
    gradient = np.zeros(dof)
    for i in range(dof):
        shifted = flat.copy()
        shifted[i] = flat[i] + step
        upper = dirichlet_Dnu(LatticeField(phi.grid, 3, shifted.reshape(phi.values.shape)), nu)
        shifted[i] = flat[i] - step
        lower = dirichlet_Dnu(LatticeField(phi.grid, 3, shifted.reshape(phi.values.shape)), nu)
        gradient[i] = (upper - lower) / (2.0 * step)
    return LatticeField(phi.grid, 3, gradient.reshape(phi.values.shape))


def rhs_dirichlet_gradient(state: FlowState, nu: Sequence[float]) -> LatticeField:
    """Negative gradient of D_nu, divided by the cell volume to approximate the L2 gradient."""
    gradient = dirichlet_gradient(state.phi, nu)
    return gradient.scaled(-1.0 / state.grid.cell_volume)


def rhs_volume_gradient(state: FlowState, rate: float) -> LatticeField:
    """lambda * phi: a pure rescaling with phi(t) = e^(lambda t) phi(0)."""
    return state.phi.scaled(rate)


class HeatFlow(Flow):
    def initial_state(self, field: LatticeField, t: float = 0.0, step: int = 0, psi=None) -> FlowState:
        return FlowState(t=t, field=field, step=step)

    def variable(self, state: FlowState) -> LatticeField:
        return state.field

    def rebuild(self, variable: LatticeField, t: float, previous: FlowState) -> FlowState:
        if not np.all(np.isfinite(variable.values)):
            raise NonFiniteError("heat-flow field became non-finite")
        return FlowState(t=t, field=variable, step=previous.step, diagnostics=previous.diagnostics)

    def rate(self, state: FlowState) -> LatticeField:
        return rhs_heat(state.field)


class ModifiedHeatFlow(HeatFlow):
    def __init__(self, spec: FlowSpec) -> None:
        super().__init__(spec)
        self.lambda1 = float(spec.parameter("lambda1"))

    def rate(self, state: FlowState) -> LatticeField:
        return rhs_heat_modified(state.field, self.lambda1)


class StructureFlow(Flow):
    """Flows of positive 3-forms, integrating phi itself."""

    def initial_state(self, field: LatticeField, t: float = 0.0, step: int = 0, psi=None) -> FlowState:
        return FlowState(t=t, field=field, frame=frame_field(field), step=step)

    def variable(self, state: FlowState) -> LatticeField:
        return state.phi

    def rebuild(self, variable: LatticeField, t: float, previous: FlowState) -> FlowState:
        return FlowState(
            t=t,
            field=variable,
            frame=frame_field(variable),
            step=previous.step,
            diagnostics=previous.diagnostics,
        )

    def phi_rate(self, state: FlowState) -> LatticeField:
        """Rate of phi, whatever variable the flow integrates."""
        return self.rate(state)

    def stiffness(self, state: FlowState) -> float:
        return float(np.max(1.0 / state.frame.metric.eigenvalues()[..., 0]))


class LaplacianFlow(StructureFlow):
    def rate(self, state: FlowState) -> LatticeField:
        return rhs_laplacian(state)


class LaplacianDeTurckFlow(StructureFlow):
    def __init__(self, spec: FlowSpec, background: MetricField) -> None:
        super().__init__(spec)
        self.background = background

    def rate(self, state: FlowState) -> LatticeField:
        return rhs_laplacian_deturck(state, self.background)


class Coflow(StructureFlow):
    """Laplacian coflow and its modified version; integrates psi."""

    def __init__(self, spec: FlowSpec) -> None:
        super().__init__(spec)
        self.c = float(spec.parameter("c")) if spec.kind == "modified_coflow" else None

    def initial_state(
        self,
        field: LatticeField,
        t: float = 0.0,
        step: int = 0,
        psi: Optional[LatticeField] = None,
    ) -> FlowState:
        frame = frame_field(field)
        psi = psi if psi is not None else psi_field(field, frame)
        return FlowState(t=t, field=field, frame=frame, psi=psi, step=step)

    def variable(self, state: FlowState) -> LatticeField:
        return state.psi

    def rebuild(self, variable: LatticeField, t: float, previous: FlowState) -> FlowState:
        frame = phi_from_psi(variable.as_form(), guess=previous.phi.as_form())
        return FlowState(
            t=t,
            field=LatticeField.from_form(variable.grid, frame.phi),
            frame=frame,
            psi=variable,
            step=previous.step,
            diagnostics=previous.diagnostics,
        )

    def rate(self, state: FlowState) -> LatticeField:
        return coflow_psi_rate(state, self.c)

    def phi_rate(self, state: FlowState) -> LatticeField:
        return _phi_rate_from_psi_rate(state, self.rate(state))


class DirichletGradientFlow(StructureFlow):
    def __init__(self, spec: FlowSpec) -> None:
        super().__init__(spec)
        self.nu = tuple(float(w) for w in spec.parameter("nu"))

    def rate(self, state: FlowState) -> LatticeField:
        return rhs_dirichlet_gradient(state, self.nu)


class VolumeGradientFlow(StructureFlow):
    def __init__(self, spec: FlowSpec) -> None:
        super().__init__(spec)
        self.growth = float(spec.parameter("lambda"))

    def rate(self, state: FlowState) -> LatticeField:
        return rhs_volume_gradient(state, self.growth)

    def stiffness(self, state: FlowState) -> float:
        return 0.0


def build_flow(spec: FlowSpec, reference: Optional[LatticeField] = None) -> Flow:
    """
    Flow object for a spec. `reference` is the run's initial field; the
    DeTurck flow takes its metric as the fixed background.
    """
    if spec.kind == "heat":
        return HeatFlow(spec)
    if spec.kind == "heat_modified":
        return ModifiedHeatFlow(spec)
    if spec.kind == "laplacian":
        return LaplacianFlow(spec)
    if spec.kind == "laplacian_deturck":
        if reference is None:
            raise ValueError("the DeTurck flow needs the initial structure as background")
        frame = frame_field(reference)
        return LaplacianDeTurckFlow(spec, MetricField(reference.grid, frame.metric))
    if spec.kind in ("coflow", "modified_coflow"):
        return Coflow(spec)
    if spec.kind == "dirichlet_gradient":
        return DirichletGradientFlow(spec)
    if spec.kind == "volume_gradient":
        return VolumeGradientFlow(spec)

    raise ValueError(f"Unknown flow kind: {spec.kind}")
