"""Log-log convergence-rate fitting for (k, value) samples."""

from __future__ import annotations

import numpy as np


def fit_rate(pairs) -> tuple[float, float, float]:
    """Least-squares fit of log(value) against log(k).

    Returns (slope, intercept, residual); the residual is the RMS deviation
    of log(value) from the fitted line.  Values must be positive and at
    least three pairs are required.
    """
    pairs = [(float(k), float(v)) for k, v in pairs]
    if len(pairs) < 3:
        raise ValueError("need at least 3 (k, value) pairs")
    if any(v <= 0 for _, v in pairs):
        raise ValueError("values must be positive for a log-log fit")
    x = np.log([k for k, _ in pairs])
    y = np.log([v for _, v in pairs])
    a = np.vstack([x, np.ones_like(x)]).T
    coef, *_ = np.linalg.lstsq(a, y, rcond=None)
    slope, intercept = float(coef[0]), float(coef[1])
    resid = float(np.sqrt(np.mean((y - a @ coef) ** 2)))
    return slope, intercept, resid
