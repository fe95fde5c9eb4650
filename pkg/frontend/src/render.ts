/**
 * DOM rendering. Pure functions from view model to markup; charts are
 * inline SVG with the service-provided range drawn as a shaded band.
 * When the API supplies no range for a metric, the chart renders without
 * a band and without status colors — the console adds no thresholds.
 */
import { ConsoleState, MetricView, sortedMetrics, visibleAlerts } from "./store.js";
import { Alert, Actuator } from "./types.js";
import { EstopPhase } from "./estop.js";

const CHART_WIDTH = 320;
const CHART_HEIGHT = 96;

function escapeHtml(text: string): string {
  return text
    .replace(/&/g, "&amp;")
    .replace(/</g, "&lt;")
    .replace(/>/g, "&gt;")
    .replace(/"/g, "&quot;");
}

export function renderChart(view: MetricView): string {
  const points = view.points;
  if (points.length === 0) {
    return `<svg class="chart" viewBox="0 0 ${CHART_WIDTH} ${CHART_HEIGHT}"><text x="8" y="20" class="chart-empty">no data yet</text></svg>`;
  }
  const values = points.map((p) => p.value);
  const band = view.range;
  const candidates = [...values];
  if (band?.lower != null) candidates.push(band.lower);
  if (band?.upper != null) candidates.push(band.upper);
  let lo = Math.min(...candidates);
  let hi = Math.max(...candidates);
  if (hi === lo) {
    lo -= 1;
    hi += 1;
  }
  const pad = (hi - lo) * 0.1;
  lo -= pad;
  hi += pad;
  const y = (v: number) => CHART_HEIGHT - ((v - lo) / (hi - lo)) * CHART_HEIGHT;
  const x = (i: number) => (points.length === 1 ? CHART_WIDTH / 2 : (i / (points.length - 1)) * CHART_WIDTH);

  let bandRect = "";
  if (band && (band.lower != null || band.upper != null)) {
    const top = band.upper != null ? y(band.upper) : 0;
    const bottom = band.lower != null ? y(band.lower) : CHART_HEIGHT;
    bandRect = `<rect class="range-band" x="0" y="${top.toFixed(1)}" width="${CHART_WIDTH}" height="${Math.max(0, bottom - top).toFixed(1)}"/>`;
  }
  const polyline = points.map((p, i) => `${x(i).toFixed(1)},${y(p.value).toFixed(1)}`).join(" ");

  let forecastLine = "";
  if (view.forecast && view.forecast.values.length > 0) {
    const lastX = x(points.length - 1);
    const stepX = points.length > 1 ? CHART_WIDTH / (points.length - 1) : 8;
    const fPoints = view.forecast.values
      .map((v, i) => `${(lastX + (i + 1) * stepX).toFixed(1)},${y(v).toFixed(1)}`)
      .join(" ");
    forecastLine = `<polyline class="forecast-line" points="${fPoints}"/>`;
  }
  return (
    `<svg class="chart" viewBox="0 0 ${CHART_WIDTH} ${CHART_HEIGHT}" preserveAspectRatio="none">` +
    bandRect +
    `<polyline class="metric-line" points="${polyline}"/>` +
    forecastLine +
    `</svg>`
  );
}

export function renderMetricCard(view: MetricView): string {
  const latest = view.latest;
  // status class only when the service reported a status
  const statusClass = latest && view.range ? `status-${latest.status}` : "status-none";
  const valueText = latest ? latest.value.toFixed(3) : "—";
  const statusText = latest && view.range ? latest.status.replace("_", " ") : "";
  return (
    `<section class="metric-card ${statusClass}" data-metric="${escapeHtml(view.metric)}">` +
    `<header><h3>${escapeHtml(view.metric)}</h3>` +
    `<span class="metric-value">${valueText}</span>` +
    `<span class="metric-status">${escapeHtml(statusText)}</span></header>` +
    renderChart(view) +
    `</section>`
  );
}

export function renderAlertCard(alert: Alert, busy: boolean): string {
  const ackButton =
    alert.state === "active"
      ? `<button class="ack-button" data-alert-id="${alert.id}" ${busy ? "disabled" : ""}>acknowledge</button>`
      : "";
  const ackedBy = alert.acknowledged_by ? `<span class="acked-by">ack: ${escapeHtml(alert.acknowledged_by)}</span>` : "";
  return (
    `<article class="alert-card alert-${alert.state}" data-alert-id="${alert.id}">` +
    `<span class="alert-badge">${escapeHtml(alert.state)}</span>` +
    `<strong class="alert-message">${escapeHtml(alert.message)}</strong>` +
    (alert.suggestion ? `<p class="alert-suggestion">${escapeHtml(alert.suggestion)}</p>` : "") +
    ackedBy +
    ackButton +
    `</article>`
  );
}

export function renderActuatorRow(actuator: Actuator, estopLatched: boolean, busy: boolean, error?: string): string {
  const locked = estopLatched;
  const lockNote = locked ? `<span class="lock-note">safety lockout</span>` : "";
  const badge = `<span class="source-badge source-${escapeHtml(actuator.source)}">${escapeHtml(actuator.source)}</span>`;
  const disabled = locked || busy ? "disabled" : "";
  const errorNote = error ? `<span class="control-error">${escapeHtml(error)}</span>` : "";
  return (
    `<div class="actuator-row ${locked ? "locked" : ""}" data-actuator="${escapeHtml(actuator.actuator)}">` +
    `<span class="actuator-name">${escapeHtml(actuator.actuator)}</span>` +
    `<span class="actuator-demand demand-${actuator.demand}">${actuator.demand}</span>` +
    badge +
    `<button class="override-on" data-actuator="${escapeHtml(actuator.actuator)}" data-demand="on" ${disabled}>force on</button>` +
    `<button class="override-off" data-actuator="${escapeHtml(actuator.actuator)}" data-demand="off" ${disabled}>force off</button>` +
    `<button class="override-release" data-actuator="${escapeHtml(actuator.actuator)}" ${disabled}>auto</button>` +
    lockNote +
    errorNote +
    `</div>`
  );
}

export function renderEstopPanel(phase: EstopPhase): string {
  switch (phase.kind) {
    case "idle":
      return `<button id="estop-arm" class="estop-button">EMERGENCY STOP</button>`;
    case "armed":
      return (
        `<div class="estop-confirm">` +
        `<button id="estop-confirm" class="estop-button estop-confirm-button">CONFIRM SHUTDOWN</button>` +
        `<button id="estop-cancel">cancel</button></div>`
      );
    case "sending":
      return `<button class="estop-button" disabled>sending…</button>`;
    case "latched":
      return (
        `<div class="estop-banner" role="alert">EMERGENCY STOP LATCHED` +
        (phase.reason ? ` — ${escapeHtml(phase.reason)}` : "") +
        `<form id="estop-reset-form"><input id="estop-operator" placeholder="type operator name to reset"/>` +
        `<button id="estop-reset">reset</button></form></div>`
      );
    case "reset_sending":
      return `<div class="estop-banner">EMERGENCY STOP LATCHED — resetting…</div>`;
    case "error":
      return (
        `<div class="estop-error">${escapeHtml(phase.message)}` +
        `<button id="estop-retry" class="estop-button">retry</button></div>`
      );
  }
}

export function renderConnectionBanner(state: ConsoleState): string {
  switch (state.connection) {
    case "live":
      return `<div class="conn conn-live">live</div>`;
    case "connecting":
      return `<div class="conn conn-connecting">connecting…</div>`;
    case "stale":
      return `<div class="conn conn-stale" role="alert">data stale — no updates from the service</div>`;
    case "reconnecting":
      return `<div class="conn conn-stale" role="alert">connection lost — reconnecting…</div>`;
  }
}

export function renderApp(state: ConsoleState, estopPhase: EstopPhase, busy: (id: string) => boolean, controlErrors: Map<string, string>): string {
  const metrics = sortedMetrics(state).map(renderMetricCard).join("");
  const alerts = visibleAlerts(state)
    .map((a) => renderAlertCard(a, busy(`ack:${a.id}`)))
    .join("");
  const actuators = [...state.actuators.values()]
    .sort((a, b) => a.actuator.localeCompare(b.actuator))
    .map((a) =>
      renderActuatorRow(a, state.estop.latched, busy(`actuator:${a.actuator}`), controlErrors.get(`actuator:${a.actuator}`)),
    )
    .join("");
  return (
    renderConnectionBanner(state) +
    `<div id="estop-panel">${renderEstopPanel(estopPhase)}</div>` +
    `<main><div id="metrics">${metrics}</div>` +
    `<aside><h2>Alerts</h2><div id="alerts">${alerts || '<p class="empty">no alerts</p>'}</div>` +
    `<h2>Actuators</h2><div id="actuators">${actuators}</div></aside></main>`
  );
}
