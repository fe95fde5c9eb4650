/**
 * API payload schemas. Everything the console renders is validated here;
 * the service is the single source of truth and the console does no
 * threshold arithmetic of its own.
 */
import { z } from "zod";

export const RangeSchema = z.object({
  metric: z.string(),
  lower: z.number().nullable(),
  upper: z.number().nullable(),
  bound_kind: z.string(),
});
export type Range = z.infer<typeof RangeSchema>;

export const ReadingSchema = z.object({
  metric: z.string(),
  value: z.number(),
  at: z.number(),
  status: z.enum(["in_range", "below", "above", "unchecked"]),
  violated_bound: z.number().nullable(),
});
export type Reading = z.infer<typeof ReadingSchema>;

export const HistoryBucketSchema = z.object({
  bucket_start: z.number(),
  value: z.number().nullable(),
});

export const HistorySchema = z.object({
  metric: z.string(),
  step: z.number(),
  buckets: z.array(HistoryBucketSchema),
});
export type History = z.infer<typeof HistorySchema>;

export const ForecastSchema = z.object({
  issued_at: z.number(),
  target_metric: z.string(),
  values: z.array(z.number()),
  valid_from: z.number(),
  step: z.number(),
  model_version: z.string(),
});
export type Forecast = z.infer<typeof ForecastSchema>;

export const AlertSchema = z.object({
  id: z.number(),
  metric: z.string(),
  kind: z.string(),
  status_detail: z.string(),
  observed_or_predicted_value: z.number(),
  bound: z.number(),
  raised_at: z.number(),
  state: z.enum(["active", "acknowledged", "cleared"]),
  message: z.string(),
  suggestion: z.string().default(""),
  acknowledged_by: z.string().nullable().optional(),
});
export type Alert = z.infer<typeof AlertSchema>;

export const ActuatorSchema = z.object({
  actuator: z.string(),
  demand: z.enum(["on", "off"]),
  source: z.string(),
  since: z.number(),
});
export type Actuator = z.infer<typeof ActuatorSchema>;

export const EstopStateSchema = z.object({
  estop_latched: z.boolean(),
  reason: z.string().nullable(),
});
export type EstopState = z.infer<typeof EstopStateSchema>;

export const HealthSchema = z.object({
  estop_latched: z.boolean(),
  degraded: z.record(z.string(), z.boolean()),
  open_bucket: z.number().nullable(),
  next_seq: z.number().nullable(),
  recovered_torn_tail: z.boolean(),
});
export type Health = z.infer<typeof HealthSchema>;

/** One record from the /events stream. */
export const StreamEventSchema = z.object({
  seq: z.number(),
  at: z.number(),
  kind: z.enum(["reading", "forecast", "alert", "actuator", "estop", "system"]),
  payload: z.record(z.string(), z.unknown()),
});
export type StreamEvent = z.infer<typeof StreamEventSchema>;
