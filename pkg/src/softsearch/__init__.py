"""Deterministic gridworld simulator for multi-robot search with
soft-obstacle, accidental-rendezvous, and periodic-rendezvous strategies."""

from .geometry import ExplorationRegion, SearchBudget, margin_time, max_area
from .sim import RunConfig, RunResult, run, search_time
from .world import GridWorld, ObstacleSpec, generate_random

__all__ = [
    "ExplorationRegion",
    "GridWorld",
    "ObstacleSpec",
    "RunConfig",
    "RunResult",
    "SearchBudget",
    "generate_random",
    "margin_time",
    "max_area",
    "run",
    "search_time",
]

__version__ = "0.1.0"
