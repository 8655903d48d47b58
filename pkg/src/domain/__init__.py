from .exterior import (
    DIM,
    AltForm,
    Metric,
    MultiIndex,
    form_inner,
    hodge_star,
    interior,
    n_components,
    wedge,
)
from .g2_pointwise import (
    FlowDecomposition,
    G2Frame,
    TorsionForms,
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
    standard_phi,
    torsion_from_derivatives,
    torsion_type_residuals,
)
from .lattice import (
    Grid,
    LatticeField,
    MetricField,
    Periods,
    codiff,
    d,
    hodge_laplacian,
    integrate_top,
    l2_inner,
    periods,
)
from .g2_fields import (
    TorsionField,
    dirichlet_D,
    dirichlet_Dnu,
    frame_field,
    torsion_field,
    volume_functional,
)
from .curvature import (
    deturck_vector,
    gravitational_tensor,
    ricci_oracle,
    scalar_curvature,
)
from .snapshot import read_snapshot, write_snapshot

__all__ = [
    "DIM",
    "AltForm",
    "Metric",
    "MultiIndex",
    "form_inner",
    "hodge_star",
    "interior",
    "n_components",
    "wedge",
    "FlowDecomposition",
    "G2Frame",
    "TorsionForms",
    "decompose_coflow_rate",
    "decompose_variation",
    "i_map",
    "invert_i_map",
    "j_map",
    "ji_constants",
    "metric_from_phi",
    "nearly_parallel_coflow_coefficient",
    "phi_from_psi",
    "project2",
    "project3",
    "standard_phi",
    "torsion_from_derivatives",
    "torsion_type_residuals",
    "Grid",
    "LatticeField",
    "MetricField",
    "Periods",
    "codiff",
    "d",
    "hodge_laplacian",
    "integrate_top",
    "l2_inner",
    "periods",
    "TorsionField",
    "dirichlet_D",
    "dirichlet_Dnu",
    "frame_field",
    "torsion_field",
    "volume_functional",
    "deturck_vector",
    "gravitational_tensor",
    "ricci_oracle",
    "scalar_curvature",
    "read_snapshot",
    "write_snapshot",
]
