"""Exact solving: internal branch-and-bound, external MILP adapter and lane racing."""

from .bnb import root_bound, solve_internal, warm_incumbent
from .external import COMMAND_ENV, bundled_command, default_backend, solve_external
from .race import aggregate, lane_requests, race, run_lanes, solve
from .report import ExternalBackend, RaceResult, SolveReport, SolverRequest, relative_gap

__all__ = [
    "COMMAND_ENV",
    "ExternalBackend",
    "RaceResult",
    "SolveReport",
    "SolverRequest",
    "aggregate",
    "bundled_command",
    "default_backend",
    "lane_requests",
    "race",
    "relative_gap",
    "root_bound",
    "run_lanes",
    "solve",
    "solve_external",
    "solve_internal",
    "warm_incumbent",
]
