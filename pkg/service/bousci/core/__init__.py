"""Core components: errors, configuration, parameter schedule and the check log."""

from bousci.core.config_manager import ConfigManager
from bousci.core.errors import BousciError, SchemeAbort, SolverAbort
from bousci.core.gate_monitor import GateMonitor
from bousci.core.params import ParamSchedule, ProblemData, StageParams, build_schedule

__all__ = [
    "ConfigManager",
    "BousciError",
    "SchemeAbort",
    "SolverAbort",
    "GateMonitor",
    "ParamSchedule",
    "ProblemData",
    "StageParams",
    "build_schedule",
]
