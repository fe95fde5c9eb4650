"""Forecast output carried from the model runner to the monitor and API."""

from __future__ import annotations

import math
from dataclasses import dataclass

from ..metrics import MetricKind


@dataclass(frozen=True)
class ForecastResult:
    issued_at: int
    target_metric: MetricKind
    values: tuple[float, ...]  # denormalized, natural units
    valid_from: int
    step: int
    model_version: str

    def __post_init__(self):
        if not self.values:
            raise ValueError("forecast must carry at least one value")
        if any(not math.isfinite(v) for v in self.values):
            raise ValueError("forecast values must be finite")

    def to_dict(self) -> dict:
        return {
            "issued_at": self.issued_at,
            "target_metric": self.target_metric.name,
            "values": list(self.values),
            "valid_from": self.valid_from,
            "step": self.step,
            "model_version": self.model_version,
        }

    @classmethod
    def from_dict(cls, data: dict) -> "ForecastResult":
        return cls(issued_at=data["issued_at"],
                   target_metric=MetricKind.from_name(data["target_metric"]),
                   values=tuple(data["values"]), valid_from=data["valid_from"],
                   step=data["step"], model_version=data["model_version"])
