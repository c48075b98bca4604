"""Location error metrics reported for the test points."""
from __future__ import annotations

import numpy as np

from rxfault.neuralnet import NormalizationSpec, dminmax

# X_max - X_min of the distance grid; the reported tables divide by this
DEFAULT_DENOMINATOR_KM = 195.0
LINE_LENGTH_DENOMINATOR_KM = 200.0


def percent_error(actual_km, predicted_km, denom_km: float = DEFAULT_DENOMINATOR_KM):
    """``|actual - predicted| / denom * 100``; elementwise for arrays."""
    if not denom_km > 0:
        raise ValueError("denominator must be positive")
    out = np.abs(np.asarray(actual_km, float) - np.asarray(predicted_km, float)) / denom_km * 100.0
    return float(out) if out.ndim == 0 else out


def mse_normalized(actuals_km, predictions_km, spec: NormalizationSpec) -> float:
    """Mean squared difference after mapping both series through ``dminmax``."""
    a = np.atleast_1d(np.asarray(actuals_km, float))
    p = np.atleast_1d(np.asarray(predictions_km, float))
    if a.shape != p.shape:
        raise ValueError(f"length mismatch: {a.shape} vs {p.shape}")
    if a.size == 0:
        raise ValueError("need at least one point")
    diff = dminmax(a, spec) - dminmax(p, spec)
    return float(np.mean(diff * diff))
