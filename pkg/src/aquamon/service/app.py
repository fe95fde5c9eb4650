"""Operator-facing HTTP API over the pipeline.

Reads return snapshot-consistent state; mutations funnel through the
pipeline's single-writer lock. The event feed is server-sent events from
a client-supplied seq cursor (at-least-once; clients dedupe by seq).
"""

from __future__ import annotations

import asyncio
import json

from fastapi import FastAPI, HTTPException, Query, Request
from fastapi.middleware.cors import CORSMiddleware
from fastapi.responses import StreamingResponse

from ..metrics import InvalidMetricError, MetricKind, check_range
from ..monitor import (ActuatorId, AlertConflictError, AlertNotFoundError,
                       SafetyRejectionError)
from .pipeline import Pipeline
from .schemas import (AckBody, ActuatorOut, AlertOut, EstopBody, EstopResetBody,
                      EstopStateOut, ForecastOut, HealthOut, HistoryBucketOut,
                      HistoryOut, OverrideBody, RangeOut, ReadingOut)


def create_app(pipeline: Pipeline) -> FastAPI:
    app = FastAPI(title="aquamon", version="0.1.0")
    app.state.pipeline = pipeline
    # the operator console is served from a separate origin
    app.add_middleware(CORSMiddleware, allow_origins=["*"],
                       allow_methods=["*"], allow_headers=["*"])

    def parse_metric(name: str) -> MetricKind:
        try:
            return MetricKind.from_name(name)
        except InvalidMetricError as exc:
            raise HTTPException(status_code=404, detail=str(exc))

    def parse_actuator(name: str) -> ActuatorId:
        try:
            return ActuatorId(name)
        except ValueError:
            raise HTTPException(status_code=404, detail=f"unknown actuator {name!r}")

    @app.get("/health", response_model=HealthOut)
    async def health():
        return pipeline.health()

    @app.get("/ranges", response_model=list[RangeOut])
    async def ranges():
        return [RangeOut(metric=m.name, lower=r.lower, upper=r.upper,
                         bound_kind=r.bound_kind.name)
                for m, r in sorted(pipeline.ranges.items())]

    @app.get("/readings/latest", response_model=list[ReadingOut])
    async def latest_readings():
        out = []
        for m, (value, at) in sorted(pipeline.latest_readings.items()):
            verdict = check_range(value, pipeline.ranges.get(m), m)
            out.append(ReadingOut(metric=m.name, value=value, at=at,
                                  status=verdict.status,
                                  violated_bound=verdict.violated_bound))
        return out

    @app.get("/metrics/{metric}/history", response_model=HistoryOut)
    async def history(metric: str, from_ts: int = Query(alias="from"),
                      to_ts: int = Query(alias="to")):
        m = parse_metric(metric)
        buckets = pipeline.history_buckets_between(m, from_ts, to_ts)
        return HistoryOut(metric=m.name, step=pipeline.step,
                          buckets=[HistoryBucketOut(bucket_start=b, value=v)
                                   for b, v in buckets])

    @app.get("/forecasts/latest", response_model=list[ForecastOut])
    async def latest_forecasts():
        return [ForecastOut(**fr.to_dict())
                for _, fr in sorted(pipeline.latest_forecasts.items())]

    @app.get("/alerts", response_model=list[AlertOut])
    async def alerts(state: str | None = None):
        items = pipeline.monitor.alerts.values()
        if state is not None:
            if state not in ("active", "acknowledged", "cleared"):
                raise HTTPException(status_code=422, detail=f"unknown state {state!r}")
            items = [a for a in items if a.state == state]
        return [AlertOut(**{**a.to_dict(), "metric": a.metric.name})
                for a in sorted(items, key=lambda a: a.id)]

    @app.post("/alerts/{alert_id}/ack", response_model=AlertOut)
    async def ack_alert(alert_id: int, body: AckBody):
        async with pipeline.lock:
            try:
                pipeline.acknowledge_alert(alert_id, body.operator)
            except AlertNotFoundError as exc:
                raise HTTPException(status_code=404, detail=str(exc))
            except AlertConflictError as exc:
                raise HTTPException(status_code=409, detail=str(exc))
            alert = pipeline.monitor.alerts[alert_id]
        return AlertOut(**{**alert.to_dict(), "metric": alert.metric.name})

    @app.get("/actuators", response_model=list[ActuatorOut])
    async def actuators():
        return [ActuatorOut(actuator=a.value, demand=s.demand, source=s.source,
                            since=s.since)
                for a, s in pipeline.monitor.actuators.items()]

    @app.post("/actuators/{actuator}/override", response_model=ActuatorOut)
    async def override(actuator: str, body: OverrideBody):
        aid = parse_actuator(actuator)
        async with pipeline.lock:
            try:
                if body.demand is None:
                    pipeline.release_override(aid, body.operator)
                else:
                    pipeline.actuator_override(aid, body.demand, body.operator)
            except SafetyRejectionError as exc:
                raise HTTPException(status_code=409, detail=str(exc))
            state = pipeline.monitor.actuators[aid]
        return ActuatorOut(actuator=aid.value, demand=state.demand,
                           source=state.source, since=state.since)

    @app.post("/estop", response_model=EstopStateOut)
    async def estop(body: EstopBody):
        async with pipeline.lock:
            pipeline.trigger_estop(body.reason)
        return EstopStateOut(estop_latched=pipeline.monitor.estop_latched,
                             reason=pipeline.monitor.estop_reason)

    @app.post("/estop/reset", response_model=EstopStateOut)
    async def estop_reset(body: EstopResetBody):
        async with pipeline.lock:
            pipeline.reset_estop(body.operator)
        return EstopStateOut(estop_latched=pipeline.monitor.estop_latched,
                             reason=pipeline.monitor.estop_reason)

    @app.get("/events")
    async def events(request: Request, cursor: int = 0):
        """Ordered SSE feed; first delivered event has seq cursor+1."""

        async def stream():
            queue = pipeline.subscribe()
            try:
                delivered = cursor
                if pipeline.log is not None:
                    for entry in pipeline.log.entries_after(cursor):
                        yield _sse(entry)
                        delivered = entry.seq
                while True:
                    if await request.is_disconnected():
                        return
                    try:
                        entry = await asyncio.wait_for(queue.get(), timeout=1.0)
                    except asyncio.TimeoutError:
                        yield ": keepalive\n\n"
                        continue
                    if entry.seq > delivered:
                        yield _sse(entry)
                        delivered = entry.seq
            finally:
                pipeline.unsubscribe(queue)

        return StreamingResponse(stream(), media_type="text/event-stream")

    return app


def _sse(entry) -> str:
    data = json.dumps({"seq": entry.seq, "at": entry.at, "kind": entry.kind,
                       "payload": entry.payload}, separators=(",", ":"))
    return f"id: {entry.seq}\nevent: {entry.kind}\ndata: {data}\n\n"
