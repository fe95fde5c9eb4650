from .app import create_app
from .config import ConfigError, RuntimeConfig, load_config
from .eventlog import EventLog, EventLogEntry
from .pipeline import Pipeline

__all__ = ["ConfigError", "EventLog", "EventLogEntry", "Pipeline",
           "RuntimeConfig", "create_app", "load_config"]
