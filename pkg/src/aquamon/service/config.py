"""Runtime configuration: YAML file + environment overrides, validated
at startup with field-precise diagnostics.
"""

from __future__ import annotations

import os
from pathlib import Path
from typing import Optional

import yaml
from pydantic import BaseModel, Field, ValidationError, field_validator

from ..metrics import MetricKind, RangeConfigError, default_ranges, ranges_from_mapping
from ..monitor import DEFAULT_ACTUATOR_MAP, ActuatorId, MonitorConfig


class ConfigError(ValueError):
    pass


class RuntimeConfig(BaseModel):
    api_host: str = "127.0.0.1"
    api_port: int = Field(default=8000, ge=0, le=65535)
    gateway_host: str = "127.0.0.1"
    gateway_port: int = Field(default=9100, ge=0, le=65535)
    gateway_flush_timeout: float = Field(default=2.0, gt=0)

    persistence_dir: str = "./aquamon-data"

    resample_step: int = Field(default=600, gt=0)       # seconds
    forecast_cadence: int = Field(default=3600, gt=0)   # seconds
    history_steps: int = Field(default=3, ge=1)
    horizon_steps: int = Field(default=6, ge=1)

    #: metric name -> weight file path; empty means monitoring-only mode
    model_files: dict[str, str] = Field(default_factory=dict)

    #: metric name -> {lower?, upper?} overrides on the stock ranges;
    #: null removes a range
    ranges: dict[str, Optional[dict[str, float]]] = Field(default_factory=dict)

    n_raise: int = Field(default=2, ge=1)
    m_clear: int = Field(default=3, ge=1)
    forecast_drives_actuators: bool = False
    #: "metric:direction" -> actuator name overrides
    actuator_map: dict[str, str] = Field(default_factory=dict)

    #: optional CSV to replay when no gateway input is expected
    replay_file: Optional[str] = None
    #: history buckets kept per metric for API queries and recovery
    history_buckets: int = Field(default=2048, ge=16)

    @field_validator("model_files", "ranges")
    @classmethod
    def _known_metrics(cls, value: dict, info):
        for name in value:
            try:
                MetricKind.from_name(name)
            except ValueError as exc:
                raise ValueError(str(exc))
        return value

    def resolved_ranges(self):
        try:
            overrides = {k: (v or {}) for k, v in self.ranges.items()} if self.ranges else {}
            return ranges_from_mapping(overrides) if overrides else default_ranges()
        except RangeConfigError as exc:
            raise ConfigError(f"ranges: {exc}") from None

    def monitor_config(self) -> MonitorConfig:
        mapping = dict(DEFAULT_ACTUATOR_MAP)
        for key, actuator_name in self.actuator_map.items():
            try:
                metric_name, direction = key.split(":")
                metric = MetricKind.from_name(metric_name)
                if direction not in ("below", "above"):
                    raise ValueError(f"direction must be below/above, got {direction!r}")
                mapping[(metric, direction)] = ActuatorId(actuator_name)
            except (ValueError, KeyError) as exc:
                raise ConfigError(f"actuator_map[{key!r}]: {exc}") from None
        return MonitorConfig(n_raise=self.n_raise, m_clear=self.m_clear,
                             actuator_map=mapping,
                             forecast_drives_actuators=self.forecast_drives_actuators)


_ENV_OVERRIDES = {
    "AQUAMON_API_HOST": "api_host",
    "AQUAMON_API_PORT": "api_port",
    "AQUAMON_GATEWAY_HOST": "gateway_host",
    "AQUAMON_GATEWAY_PORT": "gateway_port",
    "AQUAMON_DATA_DIR": "persistence_dir",
}


def load_config(path: Optional[Path] = None) -> RuntimeConfig:
    """Load YAML config (optional) with environment-variable overrides."""
    data: dict = {}
    if path is not None:
        try:
            raw = Path(path).read_text(encoding="utf-8")
        except OSError as exc:
            raise ConfigError(f"cannot read config file {path}: {exc}") from None
        try:
            data = yaml.safe_load(raw) or {}
        except yaml.YAMLError as exc:
            raise ConfigError(f"{path}: invalid YAML: {exc}") from None
        if not isinstance(data, dict):
            raise ConfigError(f"{path}: top level must be a mapping")
    for env, field_name in _ENV_OVERRIDES.items():
        if env in os.environ:
            data[field_name] = os.environ[env]
    try:
        config = RuntimeConfig(**data)
    except ValidationError as exc:
        details = "; ".join(
            f"{'.'.join(str(p) for p in err['loc'])}: {err['msg']}" for err in exc.errors())
        raise ConfigError(f"invalid configuration: {details}") from None
    # fail fast on range/actuator problems too
    config.resolved_ranges()
    config.monitor_config()
    return config
