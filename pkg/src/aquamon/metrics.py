"""Canonical metric registry and optimal-range semantics.

Everything here is immutable and pure; it is the shared vocabulary the
ingest, forecasting, monitoring and API layers all consume.
"""

from __future__ import annotations

import math
from dataclasses import dataclass
from enum import IntEnum
from typing import Mapping, Optional


class MetricKind(IntEnum):
    """All metrics the system knows about, with stable wire ids."""

    temperature = 0        # °C
    ph = 1                 # unitless
    dissolved_oxygen = 2   # mg/L
    tds = 3                # mg/L
    nitrite = 4            # mg/L
    nitrate = 5            # mg/L
    ammonia = 6            # mg/L
    turbidity = 7          # dataset units (cm clarity depth in config docs)
    population = 8         # count
    fish_length = 9        # cm
    fish_weight = 10       # g

    @property
    def is_water_metric(self) -> bool:
        """Water metrics are eligible for range checks and forecasting."""
        return self.value <= MetricKind.turbidity.value

    @classmethod
    def from_id(cls, metric_id: int) -> "MetricKind":
        try:
            return cls(metric_id)
        except ValueError:
            raise InvalidMetricError(f"unknown metric id {metric_id}") from None

    @classmethod
    def from_name(cls, name: str) -> "MetricKind":
        try:
            return cls[name.strip().lower()]
        except KeyError:
            raise InvalidMetricError(f"unknown metric name {name!r}") from None


WATER_METRICS = tuple(m for m in MetricKind if m.is_water_metric)

#: Aliases seen in dataset column headers.
COLUMN_ALIASES = {"dissolved_o2": MetricKind.dissolved_oxygen}


class InvalidMetricError(ValueError):
    pass


class RangeConfigError(ValueError):
    """Raised for malformed or duplicate range configuration."""


class BoundKind(IntEnum):
    closed_interval = 0
    min_only = 1
    max_only = 2


@dataclass(frozen=True)
class OptimalRange:
    """Acceptable band for one metric; bounds are inclusive."""

    metric: MetricKind
    lower: Optional[float] = None
    upper: Optional[float] = None

    def __post_init__(self):
        if self.lower is None and self.upper is None:
            raise RangeConfigError(f"{self.metric.name}: range needs at least one bound")
        if self.lower is not None and self.upper is not None and not self.lower < self.upper:
            raise RangeConfigError(
                f"{self.metric.name}: lower {self.lower} must be < upper {self.upper}"
            )

    @property
    def bound_kind(self) -> BoundKind:
        if self.lower is not None and self.upper is not None:
            return BoundKind.closed_interval
        return BoundKind.min_only if self.lower is not None else BoundKind.max_only


@dataclass(frozen=True)
class RangeVerdict:
    metric: MetricKind
    value: float
    status: str  # in_range | below | above | unchecked
    violated_bound: Optional[float] = None


@dataclass(frozen=True)
class SampleRecord:
    """One timestamped multi-metric observation (sparse values allowed)."""

    timestamp: int  # epoch seconds, UTC
    values: Mapping[MetricKind, float]
    entry_id: Optional[int] = None

    def __post_init__(self):
        if self.entry_id is not None and self.entry_id <= 0:
            raise ValueError(f"entry_id must be positive, got {self.entry_id}")
        for metric, value in self.values.items():
            if not math.isfinite(value):
                raise ValueError(f"{metric.name}: non-finite value {value}")


def check_range(value: float, range_: Optional[OptimalRange], metric: MetricKind) -> RangeVerdict:
    """Classify a value against a range. Bounds are inclusive.

    Dataset-context metrics and metrics without a configured range come
    back ``unchecked`` rather than silently in-range.
    """
    if not math.isfinite(value):
        raise ValueError(f"{metric.name}: cannot range-check non-finite value {value}")
    if range_ is None or not metric.is_water_metric:
        return RangeVerdict(metric=metric, value=value, status="unchecked")
    if range_.lower is not None and value < range_.lower:
        return RangeVerdict(metric=metric, value=value, status="below", violated_bound=range_.lower)
    if range_.upper is not None and value > range_.upper:
        return RangeVerdict(metric=metric, value=value, status="above", violated_bound=range_.upper)
    return RangeVerdict(metric=metric, value=value, status="in_range")


def default_ranges() -> dict[MetricKind, OptimalRange]:
    """The seven stock ranges. Ammonia has a sensor but no published band,
    so it ships unchecked until an operator configures one.

    TDS is shipped as an upper bound: dissolved solids harm at high
    concentrations. Override in config if the site disagrees.
    """
    return {
        MetricKind.temperature: OptimalRange(MetricKind.temperature, 25.0, 32.0),
        MetricKind.ph: OptimalRange(MetricKind.ph, 6.5, 8.5),
        MetricKind.dissolved_oxygen: OptimalRange(MetricKind.dissolved_oxygen, lower=5.0),
        MetricKind.tds: OptimalRange(MetricKind.tds, upper=400.0),
        MetricKind.nitrite: OptimalRange(MetricKind.nitrite, upper=0.2),
        MetricKind.nitrate: OptimalRange(MetricKind.nitrate, 0.0, 100.0),
        MetricKind.turbidity: OptimalRange(MetricKind.turbidity, 30.0, 80.0),
    }


def ranges_from_mapping(overrides: Mapping[str, Mapping[str, float]],
                        base: Optional[Mapping[MetricKind, OptimalRange]] = None
                        ) -> dict[MetricKind, OptimalRange]:
    """Apply a config document ``{metric name: {lower?, upper?}}`` on top of
    the defaults. A metric mapped to null/empty removes its range.
    """
    ranges = dict(default_ranges() if base is None else base)
    seen: set[MetricKind] = set()
    for name, bounds in overrides.items():
        metric = MetricKind.from_name(name)
        if metric in seen:
            raise RangeConfigError(f"duplicate range definition for {metric.name}")
        seen.add(metric)
        if not metric.is_water_metric:
            raise RangeConfigError(f"{metric.name} is a dataset-context metric, not range-checkable")
        if not bounds:
            ranges.pop(metric, None)
            continue
        unknown = set(bounds) - {"lower", "upper"}
        if unknown:
            raise RangeConfigError(f"{metric.name}: unknown range keys {sorted(unknown)}")
        ranges[metric] = OptimalRange(metric,
                                      lower=bounds.get("lower"),
                                      upper=bounds.get("upper"))
    return ranges
