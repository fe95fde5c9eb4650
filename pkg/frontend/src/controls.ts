/**
 * Non-optimistic mutation helpers. A control disables while its request
 * is in flight (one request per control at a time); UI state changes only
 * from the API's confirmed response. Safety rejections surface verbatim.
 */
import { ApiClient, ApiError } from "./api.js";
import { Actuator, Alert } from "./types.js";

export interface MutationResult<T> {
  ok: boolean;
  value?: T;
  /** Service-provided message, rendered unmodified near the control. */
  error?: string;
}

export class ControlGate {
  private inFlight = new Set<string>();

  constructor(private readonly api: ApiClient) {}

  isBusy(controlId: string): boolean {
    return this.inFlight.has(controlId);
  }

  private async run<T>(controlId: string, action: () => Promise<T>): Promise<MutationResult<T>> {
    if (this.inFlight.has(controlId)) {
      return { ok: false, error: "request already in flight" };
    }
    this.inFlight.add(controlId);
    try {
      return { ok: true, value: await action() };
    } catch (error) {
      const message = error instanceof ApiError ? error.detail : String((error as Error).message ?? error);
      return { ok: false, error: message };
    } finally {
      this.inFlight.delete(controlId);
    }
  }

  acknowledgeAlert(alertId: number, operator: string): Promise<MutationResult<Alert>> {
    return this.run(`ack:${alertId}`, () => this.api.acknowledgeAlert(alertId, operator));
  }

  setOverride(actuator: string, demand: "on" | "off", operator: string): Promise<MutationResult<Actuator>> {
    return this.run(`actuator:${actuator}`, () => this.api.overrideActuator(actuator, demand, operator));
  }

  releaseOverride(actuator: string, operator: string): Promise<MutationResult<Actuator>> {
    return this.run(`actuator:${actuator}`, () => this.api.overrideActuator(actuator, null, operator));
  }
}
