"""Deterministic synthetic pond.

Latent water chemistry follows mean-reverting (Ornstein-Uhlenbeck) noise
around configurable setpoints, temperature carries a diurnal sinusoid and
dissolved oxygen tracks temperature with a negative slope (warm water
holds less oxygen). Outliers replace emitted values only — they model
erroneous measurements, never a real water change.

Everything is driven by one seeded generator: (seed, params, script)
fully determine every emitted byte.
"""

from __future__ import annotations

import io
import math
import time
from dataclasses import dataclass, field
from typing import Callable, Optional, Sequence

import numpy as np

from .gateway import FLAG_SELF_TEST_FAILED, SensorFrame, encode_frame
from .ingest import format_timestamp
from .metrics import WATER_METRICS, MetricKind

DEFAULT_SETPOINTS: dict[MetricKind, float] = {
    MetricKind.temperature: 28.0,
    MetricKind.ph: 7.5,
    MetricKind.dissolved_oxygen: 6.5,
    MetricKind.tds: 250.0,
    MetricKind.nitrite: 0.05,
    MetricKind.nitrate: 50.0,
    MetricKind.ammonia: 0.2,
    MetricKind.turbidity: 55.0,
}

DEFAULT_NOISE_STDDEV: dict[MetricKind, float] = {
    MetricKind.temperature: 0.05,
    MetricKind.ph: 0.02,
    MetricKind.dissolved_oxygen: 0.08,
    MetricKind.tds: 2.0,
    MetricKind.nitrite: 0.002,
    MetricKind.nitrate: 0.5,
    MetricKind.ammonia: 0.005,
    MetricKind.turbidity: 1.0,
}

# Fig.-style dataset context columns, emitted as constants.
CONTEXT_VALUES = {
    MetricKind.population: 50.0,
    MetricKind.fish_length: 7.11,
    MetricKind.fish_weight: 2.91,
}

CSV_COLUMNS = ("created_at", "entry_id", "temperature", "turbidity", "dissolved_o2",
               "ph", "ammonia", "nitrate", "population", "fish_length", "fish_weight")


@dataclass(frozen=True)
class PondParams:
    setpoints: dict[MetricKind, float] = field(
        default_factory=lambda: dict(DEFAULT_SETPOINTS))
    noise_stddev: dict[MetricKind, float] = field(
        default_factory=lambda: dict(DEFAULT_NOISE_STDDEV))
    temp_diurnal_amplitude: float = 1.5      # °C
    do_temperature_slope: float = -0.29      # mg/L per °C away from setpoint temperature
    ou_reversion_rate: float = 0.05          # per sample, in (0, 1]
    outlier_probability: float = 0.0
    seed: int = 0
    sample_period: int = 60                  # seconds
    start_time: int = 0                      # epoch seconds of the first sample

    def __post_init__(self):
        if not 0.0 <= self.outlier_probability < 1.0:
            raise ValueError("outlier_probability must be in [0, 1)")
        if not 0.0 < self.ou_reversion_rate <= 1.0:
            raise ValueError("ou_reversion_rate must be in (0, 1]")
        if any(s < 0 for s in self.noise_stddev.values()):
            raise ValueError("noise stddevs must be >= 0")
        if self.sample_period <= 0:
            raise ValueError("sample_period must be positive")


@dataclass(frozen=True)
class ScenarioEvent:
    at: int            # offset seconds from scenario start
    action: str        # spike | ramp | sensor_fault | do_crash
    metric: Optional[MetricKind] = None
    magnitude: float = 0.0   # spike: added to the emitted value for one sample
    rate: float = 0.0        # ramp: setpoint shift per sample
    duration: int = 0        # ramp / sensor_fault / do_crash: seconds
    depth: float = 0.0       # do_crash: latent DO forced to (5 - depth)

    @classmethod
    def from_dict(cls, data: dict) -> "ScenarioEvent":
        data = dict(data)
        if data.get("metric") is not None:
            data["metric"] = MetricKind.from_name(data["metric"])
        return cls(**data)


@dataclass(frozen=True)
class ScenarioScript:
    name: str
    duration: int  # seconds
    events: tuple[ScenarioEvent, ...] = ()

    def __post_init__(self):
        offsets = [e.at for e in self.events]
        if offsets != sorted(offsets):
            raise ValueError("scenario events must be sorted by offset")
        if any(not 0 <= e.at < self.duration for e in self.events):
            raise ValueError("event offsets must fall within the scenario duration")

    @classmethod
    def from_dict(cls, data: dict) -> "ScenarioScript":
        return cls(name=data["name"], duration=int(data["duration"]),
                   events=tuple(ScenarioEvent.from_dict(e) for e in data.get("events", ())))


@dataclass
class ScenarioSummary:
    samples_emitted: int = 0
    outliers_injected: int = 0
    events_applied: int = 0


class PondSimulator:
    """Stateful generator; call step() once per sample period."""

    def __init__(self, params: PondParams):
        self.params = params
        self.rng = np.random.default_rng(params.seed)
        self._ou = {m: 0.0 for m in WATER_METRICS}
        self._ramp_offset = {m: 0.0 for m in WATER_METRICS}
        self.outliers_injected = 0

    def _latent(self, t: int) -> dict[MetricKind, float]:
        p = self.params
        theta = p.ou_reversion_rate
        for m in WATER_METRICS:
            sigma = p.noise_stddev.get(m, 0.0)
            self._ou[m] = (1 - theta) * self._ou[m] + sigma * self.rng.standard_normal()
        temp = (p.setpoints[MetricKind.temperature]
                + p.temp_diurnal_amplitude * math.sin(2 * math.pi * (t % 86400) / 86400)
                + self._ou[MetricKind.temperature]
                + self._ramp_offset[MetricKind.temperature])
        values = {MetricKind.temperature: temp}
        for m in WATER_METRICS:
            if m is MetricKind.temperature:
                continue
            v = p.setpoints[m] + self._ou[m] + self._ramp_offset[m]
            if m is MetricKind.dissolved_oxygen:
                v += p.do_temperature_slope * (temp - p.setpoints[MetricKind.temperature])
            values[m] = v
        return values

    def step(self, t: int) -> dict[MetricKind, float]:
        """Emitted values at time t. An outlier (probability p) replaces one
        metric's emitted value with setpoint x uniform(3, 10); the latent
        state is untouched.
        """
        emitted = dict(self._latent(t))
        if self.params.outlier_probability > 0 \
                and self.rng.random() < self.params.outlier_probability:
            metric = WATER_METRICS[self.rng.integers(len(WATER_METRICS))]
            emitted[metric] = self.params.setpoints[metric] * self.rng.uniform(3.0, 10.0)
            self.outliers_injected += 1
        return emitted

    def apply_ramp(self, metric: MetricKind, delta: float) -> None:
        self._ramp_offset[metric] += delta


class CsvSink:
    """Writes rows in the dataset's exact column order and timestamp form."""

    def __init__(self, stream: io.TextIOBase):
        self.stream = stream
        self._entry_id = 0
        self.stream.write(",".join(CSV_COLUMNS) + "\n")

    def emit(self, t: int, values: dict[MetricKind, float],
             faulted: frozenset[MetricKind]) -> None:
        self._entry_id += 1
        row = [format_timestamp(t), str(self._entry_id)]
        for col in CSV_COLUMNS[2:]:
            metric = MetricKind.dissolved_oxygen if col == "dissolved_o2" \
                else MetricKind[col]
            if metric in CONTEXT_VALUES:
                row.append(f"{CONTEXT_VALUES[metric]:g}")
            elif metric in faulted or metric not in values:
                row.append("")
            else:
                row.append(f"{values[metric]:.6f}")
        self.stream.write(",".join(row) + "\n")

    def close(self) -> None:
        self.stream.flush()


class FrameSink:
    """Encodes one frame per water metric and hands bytes to a writer."""

    def __init__(self, write: Callable[[bytes], None], node_id: int = 1):
        self.write = write
        self.node_id = node_id

    def emit(self, t: int, values: dict[MetricKind, float],
             faulted: frozenset[MetricKind]) -> None:
        for metric in WATER_METRICS:
            if metric not in values:
                continue
            flags = FLAG_SELF_TEST_FAILED if metric in faulted else 0
            frame = SensorFrame(node_id=self.node_id, metric_id=int(metric),
                                timestamp=t, value=values[metric], flags=flags)
            self.write(encode_frame(frame))

    def close(self) -> None:
        pass


class ListSink:
    def __init__(self):
        self.samples: list[tuple[int, dict[MetricKind, float], frozenset]] = []

    def emit(self, t, values, faulted):
        self.samples.append((t, values, faulted))

    def close(self):
        pass


def run_scenario(params: PondParams, script: ScenarioScript, sink,
                 speedup: float = 0.0) -> ScenarioSummary:
    """Generate the scripted stream into a sink.

    speedup == 0 emits as fast as possible; otherwise one sample period of
    simulated time takes period/speedup wall seconds.
    """
    sim = PondSimulator(params)
    summary = ScenarioSummary()
    period = params.sample_period
    n_samples = script.duration // period
    pending = list(script.events)
    ramps: list[tuple[int, int, MetricKind, float]] = []   # (from, to, metric, per-sample rate)
    faults: dict[MetricKind, int] = {}                      # metric -> fault end offset
    crash_until = -1
    crash_depth = 0.0
    spikes: dict[int, list[tuple[MetricKind, float]]] = {}

    try:
        for i in range(n_samples):
            offset = i * period
            t = params.start_time + offset
            while pending and pending[0].at <= offset:
                ev = pending.pop(0)
                summary.events_applied += 1
                if ev.action == "spike":
                    spikes.setdefault(i, []).append((ev.metric, ev.magnitude))
                elif ev.action == "ramp":
                    ramps.append((offset, ev.at + ev.duration, ev.metric, ev.rate))
                elif ev.action == "sensor_fault":
                    faults[ev.metric] = ev.at + ev.duration
                elif ev.action == "do_crash":
                    crash_until = ev.at + ev.duration
                    crash_depth = ev.depth
                else:
                    raise ValueError(f"unknown scenario action {ev.action!r}")

            for start, end, metric, rate in ramps:
                if start <= offset < end:
                    sim.apply_ramp(metric, rate)

            values = sim.step(t)
            if offset < crash_until:
                values[MetricKind.dissolved_oxygen] = 5.0 - crash_depth
            for metric, magnitude in spikes.pop(i, ()):
                values[metric] = values.get(metric, 0.0) + magnitude
            faulted = frozenset(m for m, end in faults.items() if offset < end)

            sink.emit(t, values, faulted)
            summary.samples_emitted += 1
            if speedup > 0:
                time.sleep(period / speedup)
    finally:
        summary.outliers_injected = sim.outliers_injected
        sink.close()
    return summary


def healthy_pond_dataset(seed: int, days: float = 7.0, sample_period: int = 60,
                         start_time: int = 0) -> ListSink:
    """Convenience: a scripted-event-free run used for training data."""
    params = PondParams(seed=seed, sample_period=sample_period, start_time=start_time)
    script = ScenarioScript(name="healthy", duration=int(days * 86400))
    sink = ListSink()
    run_scenario(params, script, sink)
    return sink
