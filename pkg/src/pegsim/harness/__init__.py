"""Scenario loading, the simulation runner, trace auditing, and the CLI."""

from .audit import AuditReport, audit
from .config import ScenarioConfig, load_config, parse_config
from .runner import ReplayResult, SimulationRunner, Trace, replay_check, run

__all__ = [
    "AuditReport",
    "audit",
    "ScenarioConfig",
    "load_config",
    "parse_config",
    "ReplayResult",
    "SimulationRunner",
    "Trace",
    "replay_check",
    "run",
]
