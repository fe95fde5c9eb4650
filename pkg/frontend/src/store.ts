/**
 * Console view model. All rendered status (in/out of range, alert state,
 * actuator source) comes verbatim from the service: the store keeps maps
 * keyed by metric / alert id / actuator name and never computes thresholds.
 */
import {
  Actuator,
  ActuatorSchema,
  Alert,
  AlertSchema,
  Forecast,
  ForecastSchema,
  Range,
  Reading,
  StreamEvent,
} from "./types.js";
import { ConnectionStatus } from "./stream.js";

export interface ChartPoint {
  at: number;
  value: number;
}

export interface MetricView {
  metric: string;
  /** null until a reading arrives; status is service-reported. */
  latest: Reading | null;
  range: Range | null;
  points: ChartPoint[];
  forecast: Forecast | null;
}

export interface EstopView {
  latched: boolean;
  reason: string | null;
}

export interface ConsoleState {
  metrics: Map<string, MetricView>;
  alerts: Map<number, Alert>;
  actuators: Map<string, Actuator>;
  estop: EstopView;
  connection: ConnectionStatus;
  lastError: string | null;
}

const MAX_CHART_POINTS = 288; // two days at a 10-minute step

export function initialState(): ConsoleState {
  return {
    metrics: new Map(),
    alerts: new Map(),
    actuators: new Map(),
    estop: { latched: false, reason: null },
    connection: "connecting",
    lastError: null,
  };
}

function metricView(state: ConsoleState, metric: string): MetricView {
  let view = state.metrics.get(metric);
  if (!view) {
    view = { metric, latest: null, range: null, points: [], forecast: null };
    state.metrics.set(metric, view);
  }
  return view;
}

/** Seed the store from the snapshot endpoints (ranges may be empty). */
export function applySnapshot(
  state: ConsoleState,
  snapshot: {
    ranges?: Range[];
    readings?: Reading[];
    alerts?: Alert[];
    actuators?: Actuator[];
    forecasts?: Forecast[];
    estopLatched?: boolean;
  },
): void {
  for (const range of snapshot.ranges ?? []) {
    metricView(state, range.metric).range = range;
  }
  for (const reading of snapshot.readings ?? []) {
    const view = metricView(state, reading.metric);
    view.latest = reading;
    pushPoint(view, { at: reading.at, value: reading.value });
  }
  for (const alert of snapshot.alerts ?? []) {
    state.alerts.set(alert.id, alert); // keyed by id: re-seeding never duplicates
  }
  for (const actuator of snapshot.actuators ?? []) {
    state.actuators.set(actuator.actuator, actuator);
  }
  for (const forecast of snapshot.forecasts ?? []) {
    metricView(state, forecast.target_metric).forecast = forecast;
  }
  if (snapshot.estopLatched !== undefined) {
    state.estop.latched = snapshot.estopLatched;
  }
}

function pushPoint(view: MetricView, point: ChartPoint): void {
  const last = view.points[view.points.length - 1];
  if (last && last.at === point.at) {
    last.value = point.value;
    return;
  }
  view.points.push(point);
  if (view.points.length > MAX_CHART_POINTS) {
    view.points.splice(0, view.points.length - MAX_CHART_POINTS);
  }
}

/** Fold one stream event into the state. Unknown shapes are ignored. */
export function applyEvent(state: ConsoleState, event: StreamEvent): void {
  switch (event.kind) {
    case "reading": {
      const values = event.payload["values"];
      if (typeof values !== "object" || values === null) return;
      for (const [metric, value] of Object.entries(values as Record<string, unknown>)) {
        if (typeof value !== "number") continue;
        const view = metricView(state, metric);
        pushPoint(view, { at: event.at, value });
        // keep the service-computed status if it refers to an older sample
        if (view.latest && view.latest.at <= event.at) {
          view.latest = { ...view.latest, value, at: event.at };
        }
      }
      return;
    }
    case "forecast": {
      const parsed = ForecastSchema.safeParse(event.payload);
      if (parsed.success) {
        metricView(state, parsed.data.target_metric).forecast = parsed.data;
      }
      return;
    }
    case "alert": {
      const parsed = AlertSchema.safeParse(event.payload["alert"]);
      if (parsed.success) {
        state.alerts.set(parsed.data.id, parsed.data);
      }
      return;
    }
    case "actuator": {
      const parsed = ActuatorSchema.safeParse({
        actuator: event.payload["actuator"],
        demand: event.payload["demand"],
        source: event.payload["source"],
        since: event.payload["at"] ?? 0,
      });
      if (parsed.success) {
        state.actuators.set(parsed.data.actuator, parsed.data);
      }
      return;
    }
    case "estop": {
      const action = event.payload["action"];
      if (action === "triggered") {
        state.estop.latched = true;
        const reason = event.payload["reason"];
        state.estop.reason = typeof reason === "string" ? reason : null;
      } else if (action === "reset") {
        state.estop.latched = false;
        state.estop.reason = null;
      }
      return;
    }
    case "system":
      return;
  }
}

/** Alerts for the feed: active and acknowledged first, newest first. */
export function visibleAlerts(state: ConsoleState): Alert[] {
  const order = { active: 0, acknowledged: 1, cleared: 2 } as const;
  return [...state.alerts.values()].sort(
    (a, b) => order[a.state] - order[b.state] || b.raised_at - a.raised_at || b.id - a.id,
  );
}

export function sortedMetrics(state: ConsoleState): MetricView[] {
  return [...state.metrics.values()].sort((a, b) => a.metric.localeCompare(b.metric));
}
