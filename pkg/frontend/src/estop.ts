/**
 * Emergency-stop control state machine.
 *
 * Trigger is a two-step confirm (arm, then confirm — exactly two
 * interactions); reset requires typing an operator name. The machine
 * never renders optimistic state: `latched` only changes when the
 * service's response says so.
 */
import { ApiClient } from "./api.js";

export type EstopPhase =
  | { kind: "idle" }
  | { kind: "armed" } // first tap done, waiting for confirm
  | { kind: "sending" }
  | { kind: "latched"; reason: string | null }
  | { kind: "reset_sending" }
  | { kind: "error"; message: string; wasLatched: boolean };

export class EstopControl {
  private phase: EstopPhase = { kind: "idle" };

  constructor(
    private readonly api: ApiClient,
    private readonly onChange: (phase: EstopPhase) => void = () => {},
  ) {}

  get state(): EstopPhase {
    return this.phase;
  }

  /** Adopt service truth (from snapshot or the event stream). */
  syncLatched(latched: boolean, reason: string | null): void {
    if (this.phase.kind === "sending" || this.phase.kind === "reset_sending") return;
    if (latched && this.phase.kind !== "latched") {
      this.set({ kind: "latched", reason });
    } else if (!latched && this.phase.kind === "latched") {
      this.set({ kind: "idle" });
    }
  }

  /** Interaction 1 of 2. */
  arm(): void {
    if (this.phase.kind === "idle" || this.phase.kind === "error") {
      this.set({ kind: "armed" });
    }
  }

  disarm(): void {
    if (this.phase.kind === "armed") this.set({ kind: "idle" });
  }

  /** Interaction 2 of 2: actually sends the shutdown request. */
  async confirm(reason: string): Promise<void> {
    if (this.phase.kind !== "armed") return;
    this.set({ kind: "sending" });
    try {
      const result = await this.api.triggerEstop(reason);
      this.set(
        result.estop_latched
          ? { kind: "latched", reason: result.reason }
          : { kind: "idle" },
      );
    } catch (error) {
      // the control must stay visible and retryable on failure
      this.set({ kind: "error", message: String((error as Error).message ?? error), wasLatched: false });
    }
  }

  /** Reset refuses to fire without a typed operator name. */
  async reset(operatorName: string): Promise<void> {
    if (this.phase.kind !== "latched" && !(this.phase.kind === "error" && this.phase.wasLatched)) return;
    if (operatorName.trim().length === 0) {
      this.set({ kind: "error", message: "operator name required to reset", wasLatched: true });
      return;
    }
    this.set({ kind: "reset_sending" });
    try {
      const result = await this.api.resetEstop(operatorName.trim());
      this.set(
        result.estop_latched
          ? { kind: "latched", reason: result.reason }
          : { kind: "idle" },
      );
    } catch (error) {
      this.set({ kind: "error", message: String((error as Error).message ?? error), wasLatched: true });
    }
  }

  private set(phase: EstopPhase): void {
    this.phase = phase;
    this.onChange(phase);
  }
}
