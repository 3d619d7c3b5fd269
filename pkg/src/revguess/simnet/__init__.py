"""Seeded discrete-event simulation of clients, servers and a guessing adversary."""
from .config import ConfigError, ScenarioConfig
from .report import RunReport, Summary, UsageError, aggregate, to_csv
from .scenario import Simulation, run_scenario
from .trace import Trace, TraceEvent, TraceParseError

__all__ = [
    "ConfigError", "RunReport", "ScenarioConfig", "Simulation", "Summary", "Trace", "TraceEvent",
    "TraceParseError", "UsageError", "aggregate", "run_scenario", "to_csv",
]
