/** Thin typed client over the service's REST surface. */
import { z } from "zod";
import {
  Actuator,
  ActuatorSchema,
  Alert,
  AlertSchema,
  EstopState,
  EstopStateSchema,
  Forecast,
  ForecastSchema,
  Health,
  HealthSchema,
  History,
  HistorySchema,
  Range,
  RangeSchema,
  Reading,
  ReadingSchema,
} from "./types.js";

export type FetchLike = (url: string, init?: RequestInit) => Promise<Response>;

export class ApiError extends Error {
  constructor(
    public readonly status: number,
    public readonly detail: string,
  ) {
    super(detail);
    this.name = "ApiError";
  }
}

async function parseResponse<T>(response: Response, schema: z.ZodType<T>): Promise<T> {
  if (!response.ok) {
    let detail = `HTTP ${response.status}`;
    try {
      const body = await response.json();
      if (typeof body?.detail === "string") detail = body.detail;
    } catch {
      /* non-JSON error body; keep the status line */
    }
    throw new ApiError(response.status, detail);
  }
  return schema.parse(await response.json());
}

export class ApiClient {
  constructor(
    private readonly baseUrl: string,
    private readonly fetchImpl: FetchLike = (url, init) => fetch(url, init),
  ) {}

  private url(path: string): string {
    return this.baseUrl.replace(/\/$/, "") + path;
  }

  private get<T>(path: string, schema: z.ZodType<T>): Promise<T> {
    return this.fetchImpl(this.url(path)).then((r) => parseResponse(r, schema));
  }

  private post<T>(path: string, body: unknown, schema: z.ZodType<T>): Promise<T> {
    return this.fetchImpl(this.url(path), {
      method: "POST",
      headers: { "content-type": "application/json" },
      body: JSON.stringify(body),
    }).then((r) => parseResponse(r, schema));
  }

  health(): Promise<Health> {
    return this.get("/health", HealthSchema);
  }

  ranges(): Promise<Range[]> {
    return this.get("/ranges", z.array(RangeSchema));
  }

  latestReadings(): Promise<Reading[]> {
    return this.get("/readings/latest", z.array(ReadingSchema));
  }

  history(metric: string, from: number, to: number): Promise<History> {
    return this.get(`/metrics/${metric}/history?from=${from}&to=${to}`, HistorySchema);
  }

  latestForecasts(): Promise<Forecast[]> {
    return this.get("/forecasts/latest", z.array(ForecastSchema));
  }

  alerts(state?: string): Promise<Alert[]> {
    const query = state ? `?state=${state}` : "";
    return this.get(`/alerts${query}`, z.array(AlertSchema));
  }

  actuators(): Promise<Actuator[]> {
    return this.get("/actuators", z.array(ActuatorSchema));
  }

  acknowledgeAlert(alertId: number, operator: string): Promise<Alert> {
    return this.post(`/alerts/${alertId}/ack`, { operator }, AlertSchema);
  }

  /** demand null releases an existing override. */
  overrideActuator(actuator: string, demand: "on" | "off" | null, operator: string): Promise<Actuator> {
    return this.post(`/actuators/${actuator}/override`, { demand, operator }, ActuatorSchema);
  }

  triggerEstop(reason: string): Promise<EstopState> {
    return this.post("/estop", { reason }, EstopStateSchema);
  }

  resetEstop(operator: string): Promise<EstopState> {
    return this.post("/estop/reset", { operator }, EstopStateSchema);
  }
}
