"""Forecast error metrics and the naive baselines.

MdAPE is reported alongside MAPE deliberately: sensor streams carry
outliers and abrupt erroneous measurements, and the median percentage
error stays put where the mean blows up.
"""

from __future__ import annotations

import math
from dataclasses import dataclass
from typing import Optional, Sequence

import numpy as np

#: |actual| below this is excluded from percentage errors (and counted).
APE_DENOMINATOR_FLOOR = 1e-6


@dataclass(frozen=True)
class EvalReport:
    mae: float
    rmse: float
    mse: float
    mdape: Optional[float]  # percent; None when every denominator was excluded
    mape: Optional[float]   # percent; ditto
    n_points: int
    n_excluded_zero_denominator: int

    def as_dict(self) -> dict:
        return {
            "mae": self.mae,
            "rmse": self.rmse,
            "mse": self.mse,
            "mdape": self.mdape,
            "mape": self.mape,
            "n_points": self.n_points,
            "n_excluded_zero_denominator": self.n_excluded_zero_denominator,
        }

    def format_table(self, label: str = "") -> str:
        def fmt(v: Optional[float]) -> str:
            return "undefined" if v is None else f"{v:.6g}"
        lines = [f"  {'model':<12} {label}" if label else ""]
        lines = []
        if label:
            lines.append(label)
        lines += [
            f"  MAE   {fmt(self.mae)}",
            f"  RMSE  {fmt(self.rmse)}",
            f"  MSE   {fmt(self.mse)}",
            f"  MdAPE {fmt(self.mdape)} %",
            f"  MAPE  {fmt(self.mape)} %",
            f"  n={self.n_points}, excluded zero-denominator={self.n_excluded_zero_denominator}",
        ]
        return "\n".join(lines)


def evaluate(predictions: Sequence[float], actuals: Sequence[float]) -> EvalReport:
    """Compute MAE/RMSE/MSE plus MdAPE and MAPE (percent).

    Percentage errors skip points with |actual| < 1e-6; the skipped count
    is surfaced instead of producing silent NaNs. Even-length medians are
    the mean of the two central order statistics.
    """
    yhat = np.asarray(predictions, dtype=float)
    y = np.asarray(actuals, dtype=float)
    if yhat.shape != y.shape or y.ndim != 1:
        raise ValueError(f"length mismatch: predictions {yhat.shape} vs actuals {y.shape}")
    if y.size == 0:
        raise ValueError("cannot evaluate empty prediction set")
    if not (np.isfinite(y).all() and np.isfinite(yhat).all()):
        raise ValueError("predictions/actuals must be finite")

    err = yhat - y
    mae = float(np.mean(np.abs(err)))
    mse = float(np.mean(err ** 2))
    rmse = math.sqrt(mse)

    usable = np.abs(y) >= APE_DENOMINATOR_FLOOR
    excluded = int(np.size(y) - np.count_nonzero(usable))
    if excluded == y.size:
        mape = mdape = None
    else:
        ape = 100.0 * np.abs(err[usable]) / np.abs(y[usable])
        mape = float(np.mean(ape))
        mdape = float(np.median(ape))
    return EvalReport(mae=mae, rmse=rmse, mse=mse, mdape=mdape, mape=mape,
                      n_points=int(y.size), n_excluded_zero_denominator=excluded)


def baseline_persistence(window: np.ndarray, target_channel: int, horizon: int) -> np.ndarray:
    """Repeat the last observed target value over the horizon."""
    window = np.asarray(window, dtype=float)
    return np.full(horizon, window[-1, target_channel])


def baseline_moving_average(window: np.ndarray, target_channel: int, horizon: int, k: int) -> np.ndarray:
    """Repeat the mean of the last k target values over the horizon."""
    window = np.asarray(window, dtype=float)
    if k > window.shape[0]:
        raise ValueError(f"k={k} exceeds history length {window.shape[0]}")
    if k < 1:
        raise ValueError("k must be >= 1")
    return np.full(horizon, float(np.mean(window[-k:, target_channel])))
