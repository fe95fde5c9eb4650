import { describe, expect, it } from "vitest";
import { renderActuatorRow, renderAlertCard, renderChart, renderEstopPanel, renderMetricCard } from "../src/render.js";
import { applySnapshot, initialState } from "../src/store.js";
import { Actuator, Alert } from "../src/types.js";

const alertFixture: Alert = {
  id: 7,
  metric: "dissolved_oxygen",
  kind: "reading_out_of_range",
  status_detail: "below",
  observed_or_predicted_value: 3.5,
  bound: 5,
  raised_at: 2400,
  state: "active",
  message: "dissolved_oxygen below 5",
  suggestion: "start aerator",
  acknowledged_by: null,
};

function viewFor(metric: string, withRange: boolean) {
  const state = initialState();
  applySnapshot(state, {
    ranges: withRange ? [{ metric, lower: 5, upper: null, bound_kind: "min_only" }] : [],
    readings: [{ metric, value: 3.5, at: 600, status: withRange ? "below" : "unchecked", violated_bound: withRange ? 5 : null }],
  });
  return state.metrics.get(metric)!;
}

describe("charts", () => {
  it("draws a shaded band only when the API supplied a range", () => {
    expect(renderChart(viewFor("dissolved_oxygen", true))).toContain("range-band");
    expect(renderChart(viewFor("dissolved_oxygen", false))).not.toContain("range-band");
  });

  it("metric card shows status colors only with a range", () => {
    expect(renderMetricCard(viewFor("dissolved_oxygen", true))).toContain("status-below");
    expect(renderMetricCard(viewFor("dissolved_oxygen", false))).toContain("status-none");
  });

  it("empty series renders a placeholder, not a crash", () => {
    const state = initialState();
    applySnapshot(state, { ranges: [{ metric: "ph", lower: 6.5, upper: 8.5, bound_kind: "both" }] });
    expect(renderChart(state.metrics.get("ph")!)).toContain("no data yet");
  });
});

describe("alert cards", () => {
  it("contains the API metric name unmodified", () => {
    const html = renderAlertCard(alertFixture, false);
    expect(html).toContain("dissolved_oxygen below 5");
    expect(html).toContain(alertFixture.metric);
  });

  it("active alerts offer acknowledge; acknowledged keep the card", () => {
    expect(renderAlertCard(alertFixture, false)).toContain("ack-button");
    const acked = renderAlertCard({ ...alertFixture, state: "acknowledged", acknowledged_by: "rania" }, false);
    expect(acked).not.toContain("ack-button");
    expect(acked).toContain("alert-acknowledged");
    expect(acked).toContain("rania");
  });

  it("escapes markup in service strings", () => {
    const html = renderAlertCard({ ...alertFixture, message: "<script>alert(1)</script>" }, false);
    expect(html).not.toContain("<script>");
  });
});

describe("actuator rows", () => {
  const aerator: Actuator = { actuator: "aerator", demand: "on", source: "auto", since: 0 };

  it("renders the source badge from the API", () => {
    expect(renderActuatorRow(aerator, false, false)).toContain("source-auto");
    expect(renderActuatorRow({ ...aerator, source: "operator_override" }, false, false)).toContain(
      "source-operator_override",
    );
  });

  it("e-stop locks every switch with a safety note", () => {
    const html = renderActuatorRow(aerator, true, false);
    expect(html).toContain("disabled");
    expect(html).toContain("safety lockout");
  });

  it("shows service rejection text verbatim", () => {
    const html = renderActuatorRow(aerator, false, false, "emergency stop latched: overrides refused");
    expect(html).toContain("emergency stop latched: overrides refused");
  });
});

describe("e-stop panel", () => {
  it("idle shows one large trigger; armed shows confirm + cancel", () => {
    expect(renderEstopPanel({ kind: "idle" })).toContain("estop-arm");
    const armed = renderEstopPanel({ kind: "armed" });
    expect(armed).toContain("estop-confirm");
    expect(armed).toContain("estop-cancel");
  });

  it("latched renders a persistent banner with a typed-name reset", () => {
    const html = renderEstopPanel({ kind: "latched", reason: "drill" });
    expect(html).toContain("EMERGENCY STOP LATCHED");
    expect(html).toContain("drill");
    expect(html).toContain("estop-operator");
  });

  it("errors keep a retry control visible", () => {
    const html = renderEstopPanel({ kind: "error", message: "boom", wasLatched: false });
    expect(html).toContain("estop-retry");
    expect(html).toContain("boom");
  });
});
