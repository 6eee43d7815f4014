"""Augmented Dickey-Fuller unit-root test (constant, no trend).

The test regresses the first difference on a constant, the lagged level,
and max_lags lagged differences, all by ordinary least squares. The test
statistic is the t-ratio of the lagged-level coefficient; its p-value
comes from the standard response-surface polynomials for the
constant-only case, evaluated through the normal CDF.
"""

from __future__ import annotations

import math
from dataclasses import dataclass

import numpy as np

from .errors import DomainError
from .nn import as_f64

# response-surface coefficients for the constant-only statistic (single
# series): below TAU_STAR use the quadratic, above it the cubic, and pin
# the p-value to 0/1 outside [TAU_MIN, TAU_MAX].
_TAU_MIN = -18.83
_TAU_MAX = 2.74
_TAU_STAR = -1.61
_SMALL_P = (2.1659, 1.4412, 0.038269)
_LARGE_P = (1.7339, 0.93202, -0.12745, -0.010368)


def _norm_cdf(x: float) -> float:
    return 0.5 * (1.0 + math.erf(x / math.sqrt(2.0)))


def mackinnon_pvalue(stat: float) -> float:
    """Approximate p-value of the constant-case ADF statistic."""
    if stat > _TAU_MAX:
        return 1.0
    if stat < _TAU_MIN:
        return 0.0
    coeffs = _SMALL_P if stat <= _TAU_STAR else _LARGE_P
    poly = 0.0
    for power, c in enumerate(coeffs):
        poly += c * stat**power
    return _norm_cdf(poly)


@dataclass
class AdfReport:
    column: str
    statistic: float
    p_value: float
    lags: int
    n_obs: int
    conclusion: str  # "stationary" | "non-stationary"

    def as_dict(self):
        return {
            "column": self.column,
            "statistic": self.statistic,
            "p_value": self.p_value,
            "lags": self.lags,
            "n_obs": self.n_obs,
            "conclusion": self.conclusion,
        }


def adf_test(series, max_lags: int = 4, significance: float = 0.01,
             column: str = "series") -> AdfReport:
    """Run the test on one gap-free series.

    Needs at least 25 + max_lags observations. A constant series has no
    defined statistic and is rejected as degenerate.
    """
    y = as_f64(series).ravel()
    n = y.size
    if np.isnan(y).any():
        raise DomainError("series contains missing values")
    if n < 25 + max_lags:
        raise DomainError(f"series too short for the test: {n} < {25 + max_lags}")
    if np.ptp(y) == 0.0:
        raise DomainError("constant series: unit-root test is degenerate")

    dy = np.diff(y)
    p = max_lags
    rows = dy.size - p
    X = np.empty((rows, 2 + p))
    X[:, 0] = 1.0
    X[:, 1] = y[p:-1]
    for i in range(1, p + 1):
        X[:, 1 + i] = dy[p - i : dy.size - i]
    target = dy[p:]

    beta, _, _, _ = np.linalg.lstsq(X, target, rcond=None)
    resid = target - X @ beta
    dof = rows - X.shape[1]
    if dof <= 0:
        raise DomainError("not enough observations for the chosen lag order")
    sigma2 = float(resid @ resid) / dof
    xtx_inv = np.linalg.inv(X.T @ X)
    se = math.sqrt(sigma2 * xtx_inv[1, 1])
    stat = float(beta[1] / se)
    p_value = mackinnon_pvalue(stat)
    conclusion = "stationary" if p_value < significance else "non-stationary"
    return AdfReport(column, stat, p_value, max_lags, rows, conclusion)
