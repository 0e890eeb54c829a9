"""SDC constraints, the exact time-indexed ILP, objectives and interchange files."""

from .interchange import emit_lp, emit_mip_start, emit_mps, parse_mps, parse_solution, same_model
from .model import IlpModel, Problem, build_ilp, x_name, z_name
from .objective import (
    DEFAULT_ALPHA,
    ObjectiveBreakdown,
    combined_value,
    comm_cost,
    complete_schedule,
    evaluate_objective,
    heuristic_objective,
    heuristic_schedule,
    hinted_bounds,
    peak_scale,
    stage_loads,
)
from .sdc import SdcSystem, build_sdc, feasible

__all__ = [
    "DEFAULT_ALPHA",
    "IlpModel",
    "ObjectiveBreakdown",
    "Problem",
    "SdcSystem",
    "build_ilp",
    "build_sdc",
    "combined_value",
    "comm_cost",
    "complete_schedule",
    "emit_lp",
    "emit_mip_start",
    "emit_mps",
    "evaluate_objective",
    "feasible",
    "heuristic_objective",
    "heuristic_schedule",
    "hinted_bounds",
    "parse_mps",
    "parse_solution",
    "peak_scale",
    "same_model",
    "stage_loads",
    "x_name",
    "z_name",
]
