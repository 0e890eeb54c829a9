from __future__ import annotations

import math
from dataclasses import dataclass, field

import numpy as np

STATUSES = ("optimal", "feasible", "infeasible", "timeout_no_incumbent")


@dataclass(frozen=True)
class ExternalBackend:
    """Command template with ``{model}``, ``{start}``, ``{timelimit}``, ``{solution}`` placeholders."""

    command: str
    keep_artifacts: str | None = None
    grace: float = 10.0


@dataclass
class SolverRequest:
    model: object
    warm_start: object = None
    time_budget: float = 60.0
    seed: int | None = None
    backend: object = "internal"
    node_limit: int | None = None
    baseline: float | None = None
    label: str = ""

    def __post_init__(self):
        if not self.time_budget > 0:
            raise ValueError(f"time budget must be positive, got {self.time_budget}")


@dataclass
class SolveReport:
    status: str
    objective: float = math.inf
    normalized_pct: float = math.inf
    best_bound: float = -math.inf
    gap: float = math.inf
    schedule: np.ndarray | None = None
    incumbent_trace: list = field(default_factory=list)
    runtime: float = 0.0
    nodes: int = 0
    label: str = ""
    seed: int | None = None
    hinted: bool = False
    message: str = ""

    def __post_init__(self):
        if self.status not in STATUSES:
            raise ValueError(f"unknown status {self.status!r}")

    @property
    def has_solution(self):
        return self.schedule is not None

    def to_dict(self):
        return {
            "label": self.label,
            "status": self.status,
            "objective": self.objective,
            "normalized_pct": self.normalized_pct,
            "best_bound": self.best_bound,
            "gap": self.gap,
            "runtime": self.runtime,
            "nodes": self.nodes,
            "seed": self.seed,
            "hinted": self.hinted,
            "schedule": None if self.schedule is None else self.schedule.tolist(),
            "incumbent_trace": [list(p) for p in self.incumbent_trace],
            "message": self.message,
        }


def relative_gap(objective, bound):
    if not math.isfinite(objective) or not math.isfinite(bound):
        return math.inf
    return max(0.0, objective - bound) / max(abs(objective), 1e-10)


@dataclass
class RaceResult:
    reports: list
    best_index: int
    J_star: float
    failures: list = field(default_factory=list)

    @property
    def best(self):
        return self.reports[self.best_index]

    def best_of(self, prefix):
        """Best objective among lanes whose label starts with ``prefix`` (``"warm"``/``"cold"``)."""
        vals = [r.objective for r in self.reports if r.label.startswith(prefix) and r.has_solution]
        return min(vals) if vals else math.inf

    def to_dict(self):
        return {
            "J_star": self.J_star,
            "best_index": self.best_index,
            "best_label": self.best.label,
            "reports": [r.to_dict() for r in self.reports],
            "failures": list(self.failures),
        }
