"""Simulator and decentralized sum-rate optimizer for cell-free MIMO OFDM
networks assisted by shared beyond-diagonal reconfigurable surfaces."""

from .config import (CircuitParams, Geometry, GroupStructure, PathlossModel,
                     Scenario, ScheduleParams, desk_scenario)
from .coordinator import RunResult, RunTrace, run_realization

__all__ = [
    "CircuitParams", "Geometry", "GroupStructure", "PathlossModel",
    "Scenario", "ScheduleParams", "desk_scenario",
    "RunResult", "RunTrace", "run_realization",
]

__version__ = "0.1.0"
