from .steppers import (
    STABILITY_RADIUS,
    cfl_limit,
    euler_stepper,
    make_stepper,
    rk4_stepper,
)
from .flows import (
    Coflow,
    DirichletGradientFlow,
    HeatFlow,
    LaplacianDeTurckFlow,
    LaplacianFlow,
    ModifiedHeatFlow,
    StructureFlow,
    VolumeGradientFlow,
    build_flow,
    coflow_psi_rate,
    dirichlet_gradient,
    rhs_coflow,
    rhs_dirichlet_gradient,
    rhs_heat,
    rhs_heat_modified,
    rhs_laplacian,
    rhs_laplacian_deturck,
    rhs_modified_coflow,
    rhs_volume_gradient,
)
from .initial import (
    band_limited_form,
    closed_heat_data,
    coclosed_heat_data,
    fourier_mode,
    make_closed_perturbation,
    make_coclosed_perturbation,
    mode_eigenvalue,
    random_closed_structure,
    random_coclosed_structure,
    uniform_standard,
)
from .integrator import FlowIntegrator, run, step

__all__ = [
    "STABILITY_RADIUS",
    "cfl_limit",
    "euler_stepper",
    "make_stepper",
    "rk4_stepper",
    "Coflow",
    "DirichletGradientFlow",
    "HeatFlow",
    "LaplacianDeTurckFlow",
    "LaplacianFlow",
    "ModifiedHeatFlow",
    "StructureFlow",
    "VolumeGradientFlow",
    "build_flow",
    "coflow_psi_rate",
    "dirichlet_gradient",
    "rhs_coflow",
    "rhs_dirichlet_gradient",
    "rhs_heat",
    "rhs_heat_modified",
    "rhs_laplacian",
    "rhs_laplacian_deturck",
    "rhs_modified_coflow",
    "rhs_volume_gradient",
    "band_limited_form",
    "closed_heat_data",
    "coclosed_heat_data",
    "fourier_mode",
    "make_closed_perturbation",
    "make_coclosed_perturbation",
    "mode_eigenvalue",
    "random_closed_structure",
    "random_coclosed_structure",
    "uniform_standard",
    "FlowIntegrator",
    "run",
    "step",
]
