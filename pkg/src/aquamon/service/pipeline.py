"""Pipeline orchestration: gateway records -> resample buckets ->
forecasts -> supervisory cycles, all persisted to the event log.

Bucket closing is event-driven: a record whose timestamp has moved past
the open bucket closes it (and any skipped empty buckets), which makes
replay at any speedup behave identically to live operation.
"""

from __future__ import annotations

import asyncio
import logging
import time
from collections import OrderedDict
from typing import Mapping, Optional, Sequence

import numpy as np

from ..forecast import CnnModel, ForecastResult
from ..gateway import GatewayCounters
from ..metrics import MetricKind, OptimalRange, SampleRecord, WATER_METRICS
from ..monitor import ActuatorId, Monitor, MonitorConfig
from .eventlog import EventLog, EventLogEntry

log = logging.getLogger(__name__)


class Pipeline:
    def __init__(self, ranges: Mapping[MetricKind, OptimalRange],
                 monitor_config: Optional[MonitorConfig] = None,
                 event_log: Optional[EventLog] = None,
                 resample_step: int = 600,
                 forecast_cadence: int = 3600,
                 models: Optional[dict[MetricKind, CnnModel]] = None,
                 history_buckets: int = 2048):
        self.monitor = Monitor(ranges, monitor_config)
        self.ranges = dict(ranges)
        self.log = event_log
        self.step = resample_step
        self.forecast_cadence = forecast_cadence
        self.models = dict(models or {})
        self.history_buckets = history_buckets

        self.history: dict[MetricKind, "OrderedDict[int, Optional[float]]"] = {
            m: OrderedDict() for m in WATER_METRICS}
        self._acc: dict[int, dict[MetricKind, list[float]]] = {}
        self._open_bucket: Optional[int] = None
        self._next_forecast_at: Optional[int] = None
        self.latest_readings: dict[MetricKind, tuple[float, int]] = {}
        self.latest_forecasts: dict[MetricKind, ForecastResult] = {}
        self.gateway_counters: Optional[GatewayCounters] = None
        self.degraded: dict[str, bool] = {
            "no_forecast": not self.models,
            "no_gateway": False,
        }
        self.lock = asyncio.Lock()
        self.listeners: list[asyncio.Queue] = []
        self.recovered_torn_tail = False
        if self.log is not None:
            self._recover()

    # -- event plumbing ---------------------------------------------------

    def _emit(self, kind: str, payload: dict, at: int) -> Optional[EventLogEntry]:
        if self.log is None:
            return None
        entry = self.log.append(kind, payload, at)
        for queue in self.listeners:
            queue.put_nowait(entry)
        return entry

    def subscribe(self) -> asyncio.Queue:
        queue: asyncio.Queue = asyncio.Queue()
        self.listeners.append(queue)
        return queue

    def unsubscribe(self, queue: asyncio.Queue) -> None:
        if queue in self.listeners:
            self.listeners.remove(queue)

    def _now(self) -> int:
        if self._open_bucket is not None:
            return self._open_bucket + self.step
        return int(time.time())

    # -- ingest and cycles -------------------------------------------------

    def ingest_record(self, record: SampleRecord, record_only: bool = False) -> None:
        """Feed one sensor record; closes buckets its timestamp has passed.

        record_only is the recovery path: rebuild history without logging
        or re-running supervisory cycles.
        """
        water_values = {m: v for m, v in record.values.items() if m.is_water_metric}
        if not water_values:
            return
        if not record_only:
            self._emit("reading", {"values": {m.name: v for m, v in water_values.items()},
                                   "entry_id": record.entry_id}, at=record.timestamp)
        bucket = (record.timestamp // self.step) * self.step
        if self._open_bucket is None:
            self._open_bucket = bucket
        if bucket > self._open_bucket:
            self._close_through(bucket, record_only)
        if bucket >= self._open_bucket:
            acc = self._acc.setdefault(bucket, {})
            for m, v in water_values.items():
                acc.setdefault(m, []).append(v)
        # records older than the open bucket arrive after their cycle ran;
        # they are logged but no longer influence closed means

    def _close_through(self, new_open: int, record_only: bool) -> None:
        b = self._open_bucket
        while b < new_open:
            self._close_bucket(b, record_only)
            b += self.step
        self._open_bucket = new_open

    def flush_open_bucket(self) -> None:
        """Close the currently open bucket (shutdown/idle path)."""
        if self._open_bucket is not None and self._acc.get(self._open_bucket):
            bucket = self._open_bucket
            self._open_bucket = bucket + self.step
            self._close_bucket(bucket, record_only=False)

    def _close_bucket(self, bucket: int, record_only: bool) -> None:
        acc = self._acc.pop(bucket, {})
        means = {m: sum(vs) / len(vs) for m, vs in acc.items()}
        for m in WATER_METRICS:
            self.history[m][bucket] = means.get(m)
            while len(self.history[m]) > self.history_buckets:
                self.history[m].popitem(last=False)
        bucket_end = bucket + self.step
        if record_only:
            return
        if not means:
            self._emit("system", {"action": "insufficient_data",
                                  "detail": "no records in resample bucket",
                                  "bucket_start": bucket}, at=bucket_end)
        for m, v in means.items():
            self.latest_readings[m] = (v, bucket_end)
        self._maybe_forecast(bucket_end)
        if means:
            self._run_cycle(means, bucket_end)

    def _run_cycle(self, readings: dict[MetricKind, float], now: int) -> None:
        forecasts = list(self.latest_forecasts.values())
        result = self.monitor.evaluate_cycle(readings, forecast=forecasts, now=now)
        for kind, payload in result.events:
            self._emit(kind, payload, at=now)

    def _maybe_forecast(self, now: int) -> None:
        if not self.models:
            return
        if self._next_forecast_at is None:
            self._next_forecast_at = now
        if now < self._next_forecast_at:
            return
        self._next_forecast_at = now + self.forecast_cadence
        for target, model in self.models.items():
            window = self._latest_window(model)
            if window is None:
                self._emit("system", {"action": "insufficient_data",
                                      "detail": f"window for {target.name} has gaps",
                                      "metric": target.name}, at=now)
                continue
            values = model.predict(window)
            fr = ForecastResult(
                issued_at=now, target_metric=target,
                values=tuple(float(v) for v in values),
                valid_from=now, step=model.spec.step_seconds,
                model_version=model.version_tag)
            self.latest_forecasts[target] = fr
            self._emit("forecast", fr.to_dict(), at=now)

    def _latest_window(self, model: CnnModel) -> Optional[np.ndarray]:
        H = model.spec.history_steps
        cols = []
        for m in model.spec.input_metrics:
            hist = self.history[m]
            if len(hist) < H:
                return None
            tail = list(hist.items())[-H:]
            starts = [b for b, _ in tail]
            if any(starts[i + 1] - starts[i] != self.step for i in range(H - 1)):
                return None
            vals = [v for _, v in tail]
            if any(v is None for v in vals):
                return None
            cols.append(vals)
        return np.array(cols, dtype=float).T

    # -- operator mutations -------------------------------------------------

    def trigger_estop(self, reason: str, now: Optional[int] = None) -> None:
        now = self._now() if now is None else now
        for kind, payload in self.monitor.trigger_estop(reason, now):
            self._emit(kind, payload, at=now)

    def reset_estop(self, operator: str, now: Optional[int] = None) -> None:
        now = self._now() if now is None else now
        for kind, payload in self.monitor.reset_estop(operator, now):
            self._emit(kind, payload, at=now)

    def acknowledge_alert(self, alert_id: int, operator: str) -> None:
        now = self._now()
        for kind, payload in self.monitor.acknowledge_alert(alert_id, operator):
            self._emit(kind, payload, at=now)

    def actuator_override(self, actuator: ActuatorId, demand: str, operator: str) -> None:
        now = self._now()
        for kind, payload in self.monitor.actuator_override(actuator, demand, operator, now):
            self._emit(kind, payload, at=now)

    def release_override(self, actuator: ActuatorId, operator: str) -> None:
        now = self._now()
        for kind, payload in self.monitor.release_override(actuator, operator, now):
            self._emit(kind, payload, at=now)

    # -- queries -------------------------------------------------------------

    def history_buckets_between(self, metric: MetricKind, start: int, end: int
                                ) -> list[tuple[int, Optional[float]]]:
        """Explicit-null bucket list over [start, end); never densified."""
        return [(b, v) for b, v in self.history[metric].items() if start <= b < end]

    def health(self) -> dict:
        return {
            "estop_latched": self.monitor.estop_latched,
            "degraded": dict(self.degraded),
            "gateway": self.gateway_counters.as_dict() if self.gateway_counters else None,
            "models": {m.name: model.version_tag for m, model in self.models.items()},
            "open_bucket": self._open_bucket,
            "next_seq": self.log.next_seq if self.log else None,
            "recovered_torn_tail": self.recovered_torn_tail,
        }

    # -- recovery --------------------------------------------------------------

    def _recover(self) -> None:
        entries = self.log.entries_after(0)
        self.recovered_torn_tail = self.log.recovered_torn_tail
        if not entries:
            return
        for entry in entries:
            if entry.kind == "reading":
                values = {MetricKind.from_name(k): v
                          for k, v in entry.payload["values"].items()}
                record = SampleRecord(timestamp=entry.at, values=values)
                self.ingest_record(record, record_only=True)
            elif entry.kind == "forecast":
                fr = ForecastResult.from_dict(entry.payload)
                self.latest_forecasts[fr.target_metric] = fr
                self._next_forecast_at = fr.issued_at + self.forecast_cadence
            elif entry.kind in ("alert", "actuator", "estop"):
                self.monitor.replay_event(entry.kind, entry.payload)
        # refresh latest readings from reconstructed history
        for m in WATER_METRICS:
            for b, v in reversed(self.history[m].items()):
                if v is not None:
                    self.latest_readings[m] = (v, b + self.step)
                    break
        log.info("recovered %d events; estop_latched=%s",
                 len(entries), self.monitor.estop_latched)
