"""Forecast quality metrics on the normalized scale."""

from __future__ import annotations

import math
from dataclasses import dataclass

import numpy as np

from .errors import DataError
from .nn import as_f64


@dataclass
class Metrics:
    mse: float
    rmse: float
    r2: float | None  # None when y_true is constant (undefined)
    n: int

    def as_dict(self):
        return {"mse": self.mse, "rmse": self.rmse, "r2": self.r2, "n": self.n}


def compute_metrics(y_true, y_pred) -> Metrics:
    """MSE, its square root, and the coefficient of determination.

    A constant y_true makes the determination coefficient undefined; it
    is reported as None while MSE/RMSE stay valid.
    """
    y_true, y_pred = as_f64(y_true).ravel(), as_f64(y_pred).ravel()
    if y_true.size == 0:
        raise DataError("empty inputs")
    if y_true.shape != y_pred.shape:
        raise DataError(f"length mismatch: {y_true.size} vs {y_pred.size}")
    resid = y_pred - y_true
    mse = float(np.mean(resid * resid))
    ss_tot = float(np.sum((y_true - y_true.mean()) ** 2))
    r2 = None if ss_tot == 0.0 else 1.0 - float(np.sum(resid * resid)) / ss_tot
    return Metrics(mse=mse, rmse=math.sqrt(mse), r2=r2, n=y_true.size)
