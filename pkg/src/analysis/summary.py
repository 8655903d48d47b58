from __future__ import annotations

from pathlib import Path
from typing import Dict, List, Union

import numpy as np
import pandas as pd


def load_trajectory(csv_path: Union[str, Path]) -> pd.DataFrame:
    """Load a diagnostics time series from CSV."""
    csv_path = Path(csv_path)
    if not csv_path.exists():
        raise FileNotFoundError(f"Results file not found: {csv_path}")
    return pd.read_csv(csv_path)


def is_nondecreasing(values: pd.Series, tolerance: float = 0.0) -> bool:
    steps = np.diff(np.asarray(values, dtype=float))
    return bool(np.all(steps >= -tolerance))


def is_nonincreasing(values: pd.Series, tolerance: float = 0.0) -> bool:
    steps = np.diff(np.asarray(values, dtype=float))
    return bool(np.all(steps <= tolerance))


def summarize(df: pd.DataFrame, tolerance: float = 1e-10) -> Dict[str, object]:
    """Endpoints and monotonicity of the main columns of a trajectory."""
    summary: Dict[str, object] = {
        "rows": len(df),
        "t_start": float(df["t"].iloc[0]),
        "t_end": float(df["t"].iloc[-1]),
        "last_step": int(df["step"].iloc[-1]),
    }
    if "volume" in df.columns:
        summary["volume_start"] = float(df["volume"].iloc[0])
        summary["volume_end"] = float(df["volume"].iloc[-1])
        summary["volume_nondecreasing"] = is_nondecreasing(df["volume"], tolerance)
        summary["volume_nonincreasing"] = is_nonincreasing(df["volume"], tolerance)
        summary["energy_Dnu_nonincreasing"] = is_nonincreasing(df["energy_Dnu"], tolerance)
        summary["max_d_residual"] = float(df["d_residual"].max())
        summary["max_dstar_residual"] = float(df["dstar_residual"].max())
        summary["max_period_drift"] = float(df["period_drift"].max())
        summary["tau_norms_end"] = tuple(float(df[f"tau{i}_norm"].iloc[-1]) for i in range(4))
    if "energy" in df.columns:
        summary["energy_nonincreasing"] = is_nonincreasing(df["energy"], tolerance)
        summary["distance_nonincreasing"] = is_nonincreasing(df["distance_to_mean"], tolerance)
        summary["distance_end"] = float(df["distance_to_mean"].iloc[-1])
    return summary


def summary_lines(summary: Dict[str, object]) -> List[str]:
    return [f"{key:<24} {value}" for key, value in summary.items()]


def print_summary(df: pd.DataFrame) -> None:
    for line in summary_lines(summarize(df)):
        print(line)
