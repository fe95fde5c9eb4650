/** Bootstrap: wire the API client, event stream, store and renderer. */
import { ApiClient } from "./api.js";
import { ControlGate } from "./controls.js";
import { EstopControl } from "./estop.js";
import { renderApp } from "./render.js";
import { applyEvent, applySnapshot, initialState } from "./store.js";
import { EventStream } from "./stream.js";

const OPERATOR_STORAGE_KEY = "aquamon-operator";

export function startConsole(root: HTMLElement, baseUrl: string): void {
  const api = new ApiClient(baseUrl);
  const state = initialState();
  const gate = new ControlGate(api);
  const controlErrors = new Map<string, string>();
  const estop = new EstopControl(api, () => render());

  function operatorName(): string {
    let name = localStorage.getItem(OPERATOR_STORAGE_KEY) ?? "";
    if (!name) {
      name = window.prompt("operator name") ?? "operator";
      localStorage.setItem(OPERATOR_STORAGE_KEY, name);
    }
    return name;
  }

  function render(): void {
    root.innerHTML = renderApp(state, estop.state, (id) => gate.isBusy(id), controlErrors);
  }

  const stream = new EventStream({
    baseUrl,
    onEvent: (event) => {
      applyEvent(state, event);
      estop.syncLatched(state.estop.latched, state.estop.reason);
      render();
    },
    onStatus: (status) => {
      state.connection = status;
      render();
    },
  });

  async function loadSnapshot(): Promise<void> {
    const [health, ranges, readings, alerts, actuators, forecasts] = await Promise.all([
      api.health(),
      api.ranges(),
      api.latestReadings(),
      api.alerts(),
      api.actuators(),
      api.latestForecasts().catch(() => []),
    ]);
    applySnapshot(state, { ranges, readings, alerts, actuators, forecasts, estopLatched: health.estop_latched });
    estop.syncLatched(health.estop_latched, null);
    const cursor = health.next_seq != null ? Math.max(0, health.next_seq - 1) : 0;
    stream.start(cursor);
  }

  root.addEventListener("click", async (domEvent) => {
    const target = domEvent.target as HTMLElement;
    if (target.id === "estop-arm" || target.id === "estop-retry") {
      estop.arm();
    } else if (target.id === "estop-cancel") {
      estop.disarm();
    } else if (target.id === "estop-confirm") {
      await estop.confirm(`console by ${operatorName()}`);
    } else if (target.id === "estop-reset") {
      domEvent.preventDefault();
      const input = root.querySelector<HTMLInputElement>("#estop-operator");
      await estop.reset(input?.value ?? "");
    } else if (target.classList.contains("ack-button")) {
      const alertId = Number(target.dataset["alertId"]);
      render(); // repaint with the button disabled
      const result = await gate.acknowledgeAlert(alertId, operatorName());
      if (result.ok && result.value) state.alerts.set(result.value.id, result.value);
      render();
    } else if (target.classList.contains("override-on") || target.classList.contains("override-off")) {
      const actuator = target.dataset["actuator"]!;
      const demand = target.dataset["demand"] as "on" | "off";
      render();
      const result = await gate.setOverride(actuator, demand, operatorName());
      if (result.ok && result.value) state.actuators.set(result.value.actuator, result.value);
      if (result.error) controlErrors.set(`actuator:${actuator}`, result.error);
      else controlErrors.delete(`actuator:${actuator}`);
      render();
    } else if (target.classList.contains("override-release")) {
      const actuator = target.dataset["actuator"]!;
      render();
      const result = await gate.releaseOverride(actuator, operatorName());
      if (result.ok && result.value) state.actuators.set(result.value.actuator, result.value);
      if (result.error) controlErrors.set(`actuator:${actuator}`, result.error);
      else controlErrors.delete(`actuator:${actuator}`);
      render();
    }
  });

  render();
  loadSnapshot().catch(() => {
    // API unreachable: show the reconnect banner, retry the snapshot
    state.connection = "reconnecting";
    render();
    setTimeout(() => loadSnapshot().catch(() => undefined), 2000);
  });
}

declare global {
  interface Window {
    startConsole: typeof startConsole;
  }
}

if (typeof window !== "undefined") {
  window.startConsole = startConsole;
}
