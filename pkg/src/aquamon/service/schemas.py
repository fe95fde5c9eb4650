"""Pydantic request/response models for the operator API."""

from __future__ import annotations

from typing import Optional

from pydantic import BaseModel, Field


class RangeOut(BaseModel):
    metric: str
    lower: Optional[float] = None
    upper: Optional[float] = None
    bound_kind: str


class ReadingOut(BaseModel):
    metric: str
    value: float
    at: int
    status: str
    violated_bound: Optional[float] = None


class HistoryBucketOut(BaseModel):
    bucket_start: int
    value: Optional[float] = None


class HistoryOut(BaseModel):
    metric: str
    step: int
    buckets: list[HistoryBucketOut]


class ForecastOut(BaseModel):
    issued_at: int
    target_metric: str
    values: list[float]
    valid_from: int
    step: int
    model_version: str


class AlertOut(BaseModel):
    id: int
    metric: str
    kind: str
    status_detail: str
    observed_or_predicted_value: float
    bound: float
    raised_at: int
    state: str
    message: str
    suggestion: str = ""
    acknowledged_by: Optional[str] = None


class ActuatorOut(BaseModel):
    actuator: str
    demand: str
    source: str
    since: int


class HealthOut(BaseModel):
    estop_latched: bool
    degraded: dict[str, bool]
    gateway: Optional[dict] = None
    models: dict[str, str]
    open_bucket: Optional[int] = None
    next_seq: Optional[int] = None
    recovered_torn_tail: bool = False


class AckBody(BaseModel):
    operator: str = Field(min_length=1)


class OverrideBody(BaseModel):
    demand: Optional[str] = Field(default=None, pattern="^(on|off)$",
                                  description="null releases the override")
    operator: str = Field(min_length=1)


class EstopBody(BaseModel):
    reason: str = Field(min_length=1)


class EstopResetBody(BaseModel):
    operator: str = Field(min_length=1)


class EstopStateOut(BaseModel):
    estop_latched: bool
    reason: Optional[str] = None
