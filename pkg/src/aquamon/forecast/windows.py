"""Sliding-window assembly and per-channel normalization."""

from __future__ import annotations

import logging
from dataclasses import dataclass, field
from typing import Mapping, Sequence

import numpy as np

from ..ingest import RegularSeries
from ..metrics import MetricKind

log = logging.getLogger(__name__)

#: A channel whose training stddev falls below this is treated as constant.
STD_FLOOR = 1e-12


class AlignmentError(ValueError):
    pass


@dataclass(frozen=True)
class WindowSpec:
    """History/horizon geometry of one forecasting model.

    Defaults: 10-minute buckets, 30 minutes of history (3 steps),
    one hour of forecast (6 steps).
    """

    target_metric: MetricKind
    input_metrics: tuple[MetricKind, ...] = ()
    history_steps: int = 3
    horizon_steps: int = 6
    step_seconds: int = 600

    def __post_init__(self):
        if not self.input_metrics:
            object.__setattr__(self, "input_metrics", (self.target_metric,))
        if self.target_metric not in self.input_metrics:
            raise ValueError(f"target {self.target_metric.name} must be an input channel")
        if self.history_steps < 1 or self.horizon_steps < 1:
            raise ValueError("history_steps and horizon_steps must be >= 1")
        if self.step_seconds <= 0:
            raise ValueError("step_seconds must be positive")

    @property
    def n_channels(self) -> int:
        return len(self.input_metrics)

    @property
    def target_channel(self) -> int:
        return self.input_metrics.index(self.target_metric)


@dataclass
class Normalizer:
    """Per-channel standardization fitted on the training split only."""

    means: np.ndarray  # (C,)
    stds: np.ndarray   # (C,)

    @classmethod
    def fit(cls, inputs: np.ndarray) -> "Normalizer":
        """inputs: (N, H, C) stack of training windows."""
        flat = inputs.reshape(-1, inputs.shape[-1])
        means = flat.mean(axis=0)
        stds = flat.std(axis=0)
        stds = np.where(stds < STD_FLOOR, 1.0, stds)
        return cls(means=means, stds=stds)

    def transform(self, window: np.ndarray) -> np.ndarray:
        return (window - self.means) / self.stds

    def inverse_transform(self, window: np.ndarray) -> np.ndarray:
        return window * self.stds + self.means

    def transform_target(self, values: np.ndarray, channel: int) -> np.ndarray:
        return (values - self.means[channel]) / self.stds[channel]

    def inverse_transform_target(self, values: np.ndarray, channel: int) -> np.ndarray:
        return values * self.stds[channel] + self.means[channel]


def make_windows(series_map: Mapping[MetricKind, RegularSeries], spec: WindowSpec
                 ) -> list[tuple[np.ndarray, np.ndarray]]:
    """Cut aligned series into (H x C input, h target) training pairs.

    Windows whose input or target spans a missing bucket are skipped:
    the network cannot train on holes, and interpolation belongs to
    fill_gaps upstream where it is explicit.
    """
    missing = [m for m in spec.input_metrics if m not in series_map]
    if missing:
        raise AlignmentError(f"no series for input metrics {[m.name for m in missing]}")
    ref = series_map[spec.input_metrics[0]]
    for m in spec.input_metrics:
        s = series_map[m]
        if s.start != ref.start or s.step != ref.step:
            raise AlignmentError(
                f"{m.name} grid (start={s.start}, step={s.step}) misaligned with "
                f"{ref.metric.name} (start={ref.start}, step={ref.step})")
        if s.step != spec.step_seconds:
            raise AlignmentError(f"{m.name} step {s.step}s != spec step {spec.step_seconds}s")

    n = min(len(series_map[m].values) for m in spec.input_metrics)
    H, h = spec.history_steps, spec.horizon_steps
    target_vals = series_map[spec.target_metric].values
    windows: list[tuple[np.ndarray, np.ndarray]] = []
    for t in range(H - 1, n - h):
        cols = []
        ok = True
        for m in spec.input_metrics:
            vals = series_map[m].values[t - H + 1:t + 1]
            if any(v is None for v in vals):
                ok = False
                break
            cols.append(vals)
        if not ok:
            continue
        tgt = target_vals[t + 1:t + 1 + h]
        if any(v is None for v in tgt):
            continue
        windows.append((np.array(cols, dtype=float).T, np.array(tgt, dtype=float)))
    if not windows:
        log.warning("windowing produced no usable windows (n=%d, H=%d, h=%d)", n, H, h)
    return windows


def stack_windows(windows: Sequence[tuple[np.ndarray, np.ndarray]]
                  ) -> tuple[np.ndarray, np.ndarray]:
    """(N, H, C) inputs and (N, h) targets from a window list."""
    inputs = np.stack([w[0] for w in windows])
    targets = np.stack([w[1] for w in windows])
    return inputs, targets
