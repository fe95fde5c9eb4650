"""Supervisory control: alert lifecycle with hysteresis, actuator demands,
and the latching emergency stop.

The Monitor is a single-writer state machine: every mutation goes through
one of its public methods and returns the events it emitted, which the
service layer appends to the persistent log. Replaying those events
through ``replay_event`` reconstructs the safety-relevant state (latch,
active alerts, overrides) after a crash.
"""

from __future__ import annotations

import logging
import math
from dataclasses import dataclass, field, replace
from enum import Enum
from typing import Mapping, Optional

from .metrics import MetricKind, OptimalRange, check_range

log = logging.getLogger(__name__)


class ActuatorId(str, Enum):
    aerator = "aerator"
    heater = "heater"
    chiller = "chiller"
    filtration_pump = "filtration_pump"
    water_exchange_pump = "water_exchange_pump"


# (metric, direction) -> actuator. pH is deliberately alert-only: automated
# dosing is not a safe default. Overridable in config.
DEFAULT_ACTUATOR_MAP: dict[tuple[MetricKind, str], ActuatorId] = {
    (MetricKind.dissolved_oxygen, "below"): ActuatorId.aerator,
    (MetricKind.temperature, "below"): ActuatorId.heater,
    (MetricKind.temperature, "above"): ActuatorId.chiller,
    (MetricKind.tds, "above"): ActuatorId.filtration_pump,
    (MetricKind.turbidity, "below"): ActuatorId.filtration_pump,
    (MetricKind.turbidity, "above"): ActuatorId.filtration_pump,
    (MetricKind.nitrite, "above"): ActuatorId.water_exchange_pump,
    (MetricKind.nitrate, "above"): ActuatorId.water_exchange_pump,
}

DEFAULT_SUGGESTIONS: dict[tuple[MetricKind, str], str] = {
    (MetricKind.dissolved_oxygen, "below"): "run the aerator and check air stones",
    (MetricKind.temperature, "below"): "check the heater and room insulation",
    (MetricKind.temperature, "above"): "run the chiller and shade the tanks",
    (MetricKind.ph, "below"): "inspect CO2 buildup; consider a partial water change",
    (MetricKind.ph, "above"): "inspect alkalinity sources; consider a partial water change",
    (MetricKind.tds, "above"): "run the filtration pump and reduce feeding",
    (MetricKind.turbidity, "below"): "water too clear for the configured band; verify sensor",
    (MetricKind.turbidity, "above"): "run filtration; check for uneaten feed",
    (MetricKind.nitrite, "above"): "exchange water and check the biofilter",
    (MetricKind.nitrate, "above"): "exchange water and reduce stocking density",
}


class AlertNotFoundError(KeyError):
    pass


class AlertConflictError(ValueError):
    pass


class SafetyRejectionError(PermissionError):
    """A mutation was refused because the emergency stop is latched."""


@dataclass
class AlertEvent:
    id: int
    metric: MetricKind
    kind: str           # live_out_of_range | forecast_out_of_range
    status_detail: str  # below | above
    observed_or_predicted_value: float
    bound: float
    raised_at: int
    state: str = "active"  # active | acknowledged | cleared
    message: str = ""
    suggestion: str = ""
    acknowledged_by: Optional[str] = None

    def to_dict(self) -> dict:
        return {
            "id": self.id,
            "metric": self.metric.name,
            "kind": self.kind,
            "status_detail": self.status_detail,
            "observed_or_predicted_value": self.observed_or_predicted_value,
            "bound": self.bound,
            "raised_at": self.raised_at,
            "state": self.state,
            "message": self.message,
            "suggestion": self.suggestion,
            "acknowledged_by": self.acknowledged_by,
        }

    @classmethod
    def from_dict(cls, data: dict) -> "AlertEvent":
        data = dict(data)
        data["metric"] = MetricKind.from_name(data["metric"])
        return cls(**data)


@dataclass
class ActuatorState:
    demand: str = "off"  # off | on
    source: str = "auto"  # auto | operator_override | estop
    since: int = 0

    def to_dict(self) -> dict:
        return {"demand": self.demand, "source": self.source, "since": self.since}


@dataclass
class MonitorConfig:
    n_raise: int = 2
    m_clear: int = 3
    actuator_map: dict[tuple[MetricKind, str], ActuatorId] = field(
        default_factory=lambda: dict(DEFAULT_ACTUATOR_MAP))
    suggestions: dict[tuple[MetricKind, str], str] = field(
        default_factory=lambda: dict(DEFAULT_SUGGESTIONS))
    forecast_drives_actuators: bool = False

    def __post_init__(self):
        if self.n_raise < 1 or self.m_clear < 1:
            raise ValueError("n_raise and m_clear must be >= 1")


@dataclass
class CycleResult:
    raised: list[AlertEvent]
    cleared: list[AlertEvent]
    actuator_delta: list[tuple[ActuatorId, str, str]]  # (id, demand, source)
    events: list[tuple[str, dict]]


def _alert_message(metric: MetricKind, detail: str, bound: float) -> str:
    return f"{metric.name} {detail} {bound:g}"


class Monitor:
    """Single logical tank supervisor."""

    def __init__(self, ranges: Mapping[MetricKind, OptimalRange],
                 config: Optional[MonitorConfig] = None):
        self.ranges = dict(ranges)
        self.config = config or MonitorConfig()
        self.estop_latched = False
        self.estop_reason: Optional[str] = None
        self.actuators: dict[ActuatorId, ActuatorState] = {
            a: ActuatorState() for a in ActuatorId}
        self.alerts: dict[int, AlertEvent] = {}
        self._next_alert_id = 1
        # hysteresis counters keyed (metric, direction)
        self._counters: dict[tuple[MetricKind, str], int] = {}
        # consecutive in-range cycles per metric, for clearing
        self._clear_streak: dict[MetricKind, int] = {}
        self._overrides: dict[ActuatorId, str] = {}

    # -- queries ---------------------------------------------------------

    def active_alerts(self) -> list[AlertEvent]:
        return [a for a in self.alerts.values() if a.state != "cleared"]

    def _active_alert(self, kind: str, metric: MetricKind, detail: str
                      ) -> Optional[AlertEvent]:
        for a in self.alerts.values():
            if a.state != "cleared" and a.kind == kind and a.metric == metric \
                    and a.status_detail == detail:
                return a
        return None

    # -- main cycle ------------------------------------------------------

    def evaluate_cycle(self, readings: Mapping[MetricKind, float],
                       forecast=None, now: int = 0) -> CycleResult:
        """One supervisory pass over live readings and an optional forecast."""
        raised: list[AlertEvent] = []
        cleared: list[AlertEvent] = []
        events: list[tuple[str, dict]] = []

        for metric, value in sorted(readings.items()):
            if not metric.is_water_metric or not math.isfinite(value):
                log.warning("dropping malformed reading %s=%r", metric.name, value)
                continue
            verdict = check_range(value, self.ranges.get(metric), metric)
            if verdict.status in ("below", "above"):
                key = (metric, verdict.status)
                self._counters[key] = self._counters.get(key, 0) + 1
                other = (metric, "above" if verdict.status == "below" else "below")
                self._counters[other] = 0
                self._clear_streak[metric] = 0
                if self._counters[key] >= self.config.n_raise \
                        and self._active_alert("live_out_of_range", metric, verdict.status) is None:
                    alert = self._raise_alert("live_out_of_range", metric, verdict.status,
                                              value, verdict.violated_bound, now)
                    raised.append(alert)
                    events.append(("alert", {"action": "raised", "alert": alert.to_dict()}))
            else:  # in_range or unchecked
                self._counters[(metric, "below")] = 0
                self._counters[(metric, "above")] = 0
                if verdict.status == "in_range":
                    self._clear_streak[metric] = self._clear_streak.get(metric, 0) + 1
                    if self._clear_streak[metric] >= self.config.m_clear:
                        for a in list(self.alerts.values()):
                            if a.state != "cleared" and a.metric == metric \
                                    and a.kind == "live_out_of_range":
                                a.state = "cleared"
                                cleared.append(a)
                                events.append(("alert", {"action": "cleared",
                                                         "alert": a.to_dict()}))

        if forecast is not None:
            forecasts = forecast if isinstance(forecast, (list, tuple)) else [forecast]
            for fc in forecasts:
                events += self._evaluate_forecast(fc, now, raised, cleared)

        delta = self._recompute_actuators(now)
        for actuator, demand, source in delta:
            events.append(("actuator", {"actuator": actuator.value, "demand": demand,
                                        "source": source, "at": now}))
        return CycleResult(raised=raised, cleared=cleared, actuator_delta=delta,
                           events=events)

    def _evaluate_forecast(self, forecast, now: int,
                           raised: list[AlertEvent], cleared: list[AlertEvent]
                           ) -> list[tuple[str, dict]]:
        """Forecast alerts bypass hysteresis: one derived value set per cycle."""
        events: list[tuple[str, dict]] = []
        metric = forecast.target_metric
        range_ = self.ranges.get(metric)
        if range_ is None or not metric.is_water_metric:
            return events
        worst: dict[str, tuple[float, float]] = {}  # direction -> (value, bound)
        for value in forecast.values:
            verdict = check_range(float(value), range_, metric)
            if verdict.status in ("below", "above"):
                prev = worst.get(verdict.status)
                extreme = min if verdict.status == "below" else max
                if prev is None or extreme(value, prev[0]) == value:
                    worst[verdict.status] = (float(value), verdict.violated_bound)
        for detail in ("below", "above"):
            active = self._active_alert("forecast_out_of_range", metric, detail)
            if detail in worst:
                if active is None:
                    value, bound = worst[detail]
                    alert = self._raise_alert("forecast_out_of_range", metric, detail,
                                              value, bound, now)
                    raised.append(alert)
                    events.append(("alert", {"action": "raised", "alert": alert.to_dict()}))
            elif active is not None:
                active.state = "cleared"
                cleared.append(active)
                events.append(("alert", {"action": "cleared", "alert": active.to_dict()}))
        return events

    def _raise_alert(self, kind: str, metric: MetricKind, detail: str,
                     value: float, bound: float, now: int) -> AlertEvent:
        alert = AlertEvent(
            id=self._next_alert_id, metric=metric, kind=kind, status_detail=detail,
            observed_or_predicted_value=value, bound=bound, raised_at=now,
            message=_alert_message(metric, detail, bound),
            suggestion=self.config.suggestions.get((metric, detail), ""))
        self._next_alert_id += 1
        self.alerts[alert.id] = alert
        return alert

    def _recompute_actuators(self, now: int) -> list[tuple[ActuatorId, str, str]]:
        auto_on: set[ActuatorId] = set()
        for a in self.alerts.values():
            if a.state == "cleared":
                continue
            if a.kind == "forecast_out_of_range" and not self.config.forecast_drives_actuators:
                continue
            actuator = self.config.actuator_map.get((a.metric, a.status_detail))
            if actuator is not None:
                auto_on.add(actuator)

        delta: list[tuple[ActuatorId, str, str]] = []
        for actuator, state in self.actuators.items():
            if self.estop_latched:
                demand, source = "off", "estop"
            elif actuator in self._overrides:
                demand, source = self._overrides[actuator], "operator_override"
            else:
                demand, source = ("on" if actuator in auto_on else "off"), "auto"
            if (demand, source) != (state.demand, state.source):
                self.actuators[actuator] = ActuatorState(demand=demand, source=source, since=now)
                delta.append((actuator, demand, source))
        return delta

    # -- safety and operator actions -------------------------------------

    def trigger_estop(self, reason: str, now: int = 0) -> list[tuple[str, dict]]:
        """Latch the emergency stop. Always permitted; idempotent."""
        if self.estop_latched:
            return []
        prior = {a.value: s.demand for a, s in self.actuators.items()}
        self.estop_latched = True
        self.estop_reason = reason
        events: list[tuple[str, dict]] = [
            ("estop", {"action": "triggered", "reason": reason, "at": now,
                       "prior_demands": prior})]
        for actuator, demand, source in self._recompute_actuators(now):
            events.append(("actuator", {"actuator": actuator.value, "demand": demand,
                                        "source": source, "at": now}))
        return events

    def reset_estop(self, operator: str, now: int = 0) -> list[tuple[str, dict]]:
        """Clear the latch. Actuators resume auto on the next cycle."""
        if not self.estop_latched:
            log.warning("e-stop reset requested by %s but latch is clear", operator)
            return [("system", {"action": "estop_reset_noop", "operator": operator, "at": now})]
        self.estop_latched = False
        self.estop_reason = None
        for actuator in self.actuators:
            self.actuators[actuator] = ActuatorState(demand="off", source="auto", since=now)
        return [("estop", {"action": "reset", "operator": operator, "at": now})]

    def acknowledge_alert(self, alert_id: int, operator: str) -> list[tuple[str, dict]]:
        alert = self.alerts.get(alert_id)
        if alert is None:
            raise AlertNotFoundError(f"no alert with id {alert_id}")
        if alert.state == "cleared":
            raise AlertConflictError(f"alert {alert_id} already cleared")
        alert.state = "acknowledged"
        alert.acknowledged_by = operator
        return [("alert", {"action": "acknowledged", "alert": alert.to_dict()})]

    def actuator_override(self, actuator: ActuatorId, demand: str, operator: str,
                          now: int = 0) -> list[tuple[str, dict]]:
        if self.estop_latched:
            raise SafetyRejectionError("emergency stop latched: overrides refused")
        if demand not in ("on", "off"):
            raise ValueError(f"demand must be on/off, got {demand!r}")
        self._overrides[actuator] = demand
        self.actuators[actuator] = ActuatorState(demand=demand, source="operator_override",
                                                 since=now)
        return [("actuator", {"actuator": actuator.value, "demand": demand,
                              "source": "operator_override", "operator": operator, "at": now})]

    def release_override(self, actuator: ActuatorId, operator: str,
                         now: int = 0) -> list[tuple[str, dict]]:
        if self.estop_latched:
            raise SafetyRejectionError("emergency stop latched: overrides refused")
        self._overrides.pop(actuator, None)
        # demand is recomputed from auto logic on the next cycle
        state = self.actuators[actuator]
        self.actuators[actuator] = replace(state, source="auto")
        return [("actuator", {"actuator": actuator.value, "demand": state.demand,
                              "source": "auto", "operator": operator,
                              "released_override": True, "at": now})]

    # -- crash recovery ---------------------------------------------------

    def replay_event(self, kind: str, payload: dict) -> None:
        """Rebuild safety state from one persisted event. Hysteresis
        counters are intentionally not persisted: after a restart the
        monitor re-confirms excursions from scratch.
        """
        if kind == "alert":
            alert = AlertEvent.from_dict(payload["alert"])
            self.alerts[alert.id] = alert
            self._next_alert_id = max(self._next_alert_id, alert.id + 1)
        elif kind == "actuator":
            actuator = ActuatorId(payload["actuator"])
            self.actuators[actuator] = ActuatorState(
                demand=payload["demand"], source=payload["source"],
                since=payload.get("at", 0))
            if payload["source"] == "operator_override" and not payload.get("released_override"):
                self._overrides[actuator] = payload["demand"]
            else:
                self._overrides.pop(actuator, None)
        elif kind == "estop":
            if payload["action"] == "triggered":
                self.estop_latched = True
                self.estop_reason = payload.get("reason")
            elif payload["action"] == "reset":
                self.estop_latched = False
                self.estop_reason = None
