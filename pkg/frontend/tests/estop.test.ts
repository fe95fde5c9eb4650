import { describe, expect, it, vi } from "vitest";
import { ApiClient } from "../src/api.js";
import { EstopControl } from "../src/estop.js";

function jsonResponse(body: unknown, status = 200): Response {
  return new Response(JSON.stringify(body), {
    status,
    headers: { "content-type": "application/json" },
  });
}

function apiWith(fetchImpl: (url: string, init?: RequestInit) => Promise<Response>): ApiClient {
  return new ApiClient("http://svc", fetchImpl);
}

describe("EstopControl", () => {
  it("trigger is exactly two interactions: arm then confirm", async () => {
    const fetchImpl = vi.fn(async () => jsonResponse({ estop_latched: true, reason: "console" }));
    const control = new EstopControl(apiWith(fetchImpl));
    control.arm(); // interaction 1
    expect(control.state.kind).toBe("armed");
    expect(fetchImpl).not.toHaveBeenCalled(); // arming alone sends nothing
    await control.confirm("console"); // interaction 2
    expect(fetchImpl).toHaveBeenCalledOnce();
    expect(control.state).toEqual({ kind: "latched", reason: "console" });
  });

  it("confirm without arming is a no-op", async () => {
    const fetchImpl = vi.fn(async () => jsonResponse({ estop_latched: true, reason: null }));
    const control = new EstopControl(apiWith(fetchImpl));
    await control.confirm("x");
    expect(fetchImpl).not.toHaveBeenCalled();
    expect(control.state.kind).toBe("idle");
  });

  it("disarm cancels the pending confirm", () => {
    const control = new EstopControl(apiWith(vi.fn()));
    control.arm();
    control.disarm();
    expect(control.state.kind).toBe("idle");
  });

  it("request failure keeps a retry affordance, never optimistic latching", async () => {
    const fetchImpl = vi.fn(async () => jsonResponse({ detail: "boom" }, 500));
    const control = new EstopControl(apiWith(fetchImpl));
    control.arm();
    await control.confirm("x");
    expect(control.state.kind).toBe("error");
    // retry path: error -> arm again
    control.arm();
    expect(control.state.kind).toBe("armed");
  });

  it("reset requires a typed operator name", async () => {
    const fetchImpl = vi.fn(async () => jsonResponse({ estop_latched: false, reason: null }));
    const control = new EstopControl(apiWith(fetchImpl));
    control.syncLatched(true, "drill");
    await control.reset("   ");
    expect(fetchImpl).not.toHaveBeenCalled();
    expect(control.state.kind).toBe("error");
    await control.reset("rania");
    expect(fetchImpl).toHaveBeenCalledOnce();
    expect(JSON.parse(fetchImpl.mock.calls[0]![1]!.body as string)).toEqual({ operator: "rania" });
    expect(control.state.kind).toBe("idle");
  });

  it("renders latched state from the service response, not the request", async () => {
    // service refuses to unlatch: the banner must stay up
    const fetchImpl = vi.fn(async () => jsonResponse({ estop_latched: true, reason: "still down" }));
    const control = new EstopControl(apiWith(fetchImpl));
    control.syncLatched(true, "drill");
    await control.reset("rania");
    expect(control.state).toEqual({ kind: "latched", reason: "still down" });
  });

  it("syncLatched adopts stream truth but never interrupts an in-flight send", async () => {
    let resolveFetch!: (r: Response) => void;
    const fetchImpl = vi.fn(() => new Promise<Response>((resolve) => (resolveFetch = resolve)));
    const control = new EstopControl(apiWith(fetchImpl));
    control.arm();
    const pending = control.confirm("x");
    expect(control.state.kind).toBe("sending");
    control.syncLatched(false, null); // stale stream info mid-flight
    expect(control.state.kind).toBe("sending");
    resolveFetch(jsonResponse({ estop_latched: true, reason: null }));
    await pending;
    expect(control.state.kind).toBe("latched");
  });
});
