"""Agent-based epidemic simulation with individual-level intervention policies."""

__version__ = "0.1.0"

from .errors import ConfigurationError, ContractError, EpiControlError, NumericError
from .world import (
    Action,
    AreaCategory,
    DayOutcome,
    HealthStatus,
    Observation,
    VisibleHealth,
    WorldConfig,
    WorldState,
    build_world,
    observe,
    step_day,
)

__all__ = [
    "Action",
    "AreaCategory",
    "ConfigurationError",
    "ContractError",
    "DayOutcome",
    "EpiControlError",
    "HealthStatus",
    "NumericError",
    "Observation",
    "VisibleHealth",
    "WorldConfig",
    "WorldState",
    "build_world",
    "observe",
    "step_day",
]
