"""Latency-constrained DAG stage scheduling.

A differentiable sampler (:mod:`hybridsched.diffsched`) proposes feasible
schedules; confident partial assignments (:mod:`hybridsched.warmstart`)
then warm-start exact solver lanes raced in parallel
(:mod:`hybridsched.solvers`).
"""

from .config import RunConfig, load_config
from .diffsched import DiffConfig
from .formulation import build_ilp, build_sdc, evaluate_objective, feasible, heuristic_schedule
from .graph import Dag, Edge, generate_random_workload, parse_graph
from .pipeline import HybridResult, run_hybrid
from .solvers import SolverRequest, race, solve
from .warmstart import PartialSolution, ThresholdPolicy, extract_partial

__version__ = "0.1.0"

__all__ = [
    "Dag",
    "DiffConfig",
    "Edge",
    "HybridResult",
    "PartialSolution",
    "RunConfig",
    "SolverRequest",
    "ThresholdPolicy",
    "build_ilp",
    "build_sdc",
    "evaluate_objective",
    "extract_partial",
    "feasible",
    "generate_random_workload",
    "heuristic_schedule",
    "load_config",
    "parse_graph",
    "race",
    "run_hybrid",
    "solve",
]
