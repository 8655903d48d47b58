from .diagnostics import (
    DiagnosticsRecord,
    HeatRecord,
    compute_heat_record,
    compute_record,
    dirichlet_C,
    heat_energy,
    laplacian_f0_residual,
    metric_rate_from_torsion,
    reference_periods,
    ricci_from_laplacian,
    spectral_heat_reference,
    total_scalar_curvature,
    volume_rate,
)
from .validation import ValidationCheck, ValidationReport, run_validation
from .summary import load_trajectory, summarize

__all__ = [
    "DiagnosticsRecord",
    "HeatRecord",
    "compute_heat_record",
    "compute_record",
    "dirichlet_C",
    "heat_energy",
    "laplacian_f0_residual",
    "metric_rate_from_torsion",
    "reference_periods",
    "ricci_from_laplacian",
    "spectral_heat_reference",
    "total_scalar_curvature",
    "volume_rate",
    "ValidationCheck",
    "ValidationReport",
    "run_validation",
    "load_trajectory",
    "summarize",
]
