"""Wires config -> pipeline + gateway + API into one running service."""

from __future__ import annotations

import asyncio
import logging
from dataclasses import dataclass
from pathlib import Path
from typing import Optional

from fastapi import FastAPI

from ..forecast import CnnModel, IntegrityError, ShapeError, VersionError, load_model
from ..gateway import GatewayServer
from ..ingest import load_dataset
from ..metrics import MetricKind
from .app import create_app
from .config import ConfigError, RuntimeConfig
from .eventlog import EventLog
from .pipeline import Pipeline

log = logging.getLogger(__name__)


class StartupError(RuntimeError):
    pass


def load_models(config: RuntimeConfig, allow_missing: bool = False
                ) -> dict[MetricKind, CnnModel]:
    models: dict[MetricKind, CnnModel] = {}
    for name, path in config.model_files.items():
        metric = MetricKind.from_name(name)
        try:
            model = load_model(path)
        except FileNotFoundError:
            if allow_missing:
                log.warning("model file %s missing; %s runs without forecasts",
                            path, metric.name)
                continue
            raise StartupError(f"model file for {metric.name} not found: {path}")
        except (IntegrityError, VersionError, ShapeError) as exc:
            raise StartupError(f"model file {path}: {exc}")
        if model.spec.target_metric != metric:
            raise StartupError(
                f"model {path} targets {model.spec.target_metric.name}, "
                f"configured for {metric.name}")
        if model.spec.step_seconds != config.resample_step:
            raise StartupError(
                f"model {path} expects {model.spec.step_seconds}s buckets but "
                f"resample_step is {config.resample_step}s")
        models[metric] = model
    return models


@dataclass
class ServiceRuntime:
    config: RuntimeConfig
    pipeline: Pipeline
    gateway: GatewayServer
    app: FastAPI
    replay_task: Optional[asyncio.Task] = None

    @classmethod
    async def start(cls, config: RuntimeConfig, allow_missing_models: bool = False
                    ) -> "ServiceRuntime":
        models = load_models(config, allow_missing_models)
        event_log = EventLog(Path(config.persistence_dir))
        pipeline = Pipeline(
            ranges=config.resolved_ranges(),
            monitor_config=config.monitor_config(),
            event_log=event_log,
            resample_step=config.resample_step,
            forecast_cadence=config.forecast_cadence,
            models=models,
            history_buckets=config.history_buckets)

        async def sink(record):
            async with pipeline.lock:
                pipeline.ingest_record(record)

        gateway = GatewayServer(config.gateway_host, config.gateway_port, sink,
                                flush_timeout=config.gateway_flush_timeout)
        try:
            await gateway.start()
        except OSError as exc:
            raise StartupError(f"cannot bind gateway {config.gateway_host}:"
                               f"{config.gateway_port}: {exc}")
        pipeline.gateway_counters = gateway.counters
        runtime = cls(config=config, pipeline=pipeline, gateway=gateway,
                      app=create_app(pipeline))
        if config.replay_file:
            pipeline.degraded["no_gateway"] = True
            runtime.replay_task = asyncio.create_task(runtime._replay())
        return runtime

    async def _replay(self) -> None:
        try:
            dataset = load_dataset(Path(self.config.replay_file).open(),
                                   source_name=self.config.replay_file)
        except OSError as exc:
            log.error("replay file unreadable: %s", exc)
            return
        for record in dataset.records:
            async with self.pipeline.lock:
                self.pipeline.ingest_record(record)
            await asyncio.sleep(0)
        async with self.pipeline.lock:
            self.pipeline.flush_open_bucket()

    async def stop(self) -> None:
        if self.replay_task:
            self.replay_task.cancel()
        await self.gateway.stop()
        async with self.pipeline.lock:
            self.pipeline.flush_open_bucket()
            self.pipeline._emit("system", {"action": "shutdown"},
                                at=self.pipeline._now())
        if self.pipeline.log:
            self.pipeline.log.close()


async def serve_forever(config: RuntimeConfig, allow_missing_models: bool = False) -> None:
    """Run the full service until interrupted."""
    import uvicorn

    runtime = await ServiceRuntime.start(config, allow_missing_models)
    server = uvicorn.Server(uvicorn.Config(
        runtime.app, host=config.api_host, port=config.api_port, log_level="warning"))
    try:
        await server.serve()
    finally:
        await runtime.stop()
