"""Exact schedule objective, normalization baseline and list scheduling."""

from __future__ import annotations

import math
from dataclasses import dataclass

import numpy as np

from ..errors import InfeasibleError
from ..graph import window_bounds
from .sdc import build_sdc, feasible

DEFAULT_ALPHA = 1.0


@dataclass(frozen=True)
class ObjectiveBreakdown:
    peak: int
    comm: float
    combined: float
    normalized_pct: float


def peak_scale(node_count, latency):
    """Peak lower bound ``ceil(|V| / L)`` used to normalize the peak term."""
    return math.ceil(node_count / latency)


def combined_value(peak, comm, dag, latency, alpha):
    w = dag.total_weight
    return alpha * peak / peak_scale(dag.node_count, latency) + (comm / w if w > 0 else 0.0)


def stage_loads(schedule, latency):
    return np.bincount(np.asarray(schedule, dtype=np.int64), minlength=latency)


def comm_cost(schedule, dag):
    """Total weight of stage boundaries crossed, ``sum_e w_e * max(0, s_j - s_i)``."""
    if not dag.edges:
        return 0.0
    s = np.asarray(schedule, dtype=np.int64)
    span = np.maximum(0, s[dag.dst] - s[dag.src])
    return float(np.dot(dag.weight, span))


def evaluate_objective(schedule, dag, latency, alpha=DEFAULT_ALPHA, baseline=None):
    """Peak load, crossing cost and combined objective of a feasible schedule.

    ``baseline`` is the combined objective the percentage is taken against;
    when omitted it is the combined value of :func:`heuristic_schedule`.
    """
    s = np.asarray(schedule, dtype=np.int64)
    if not feasible(s, build_sdc(dag, latency)):
        raise InfeasibleError("cannot evaluate an infeasible schedule")
    peak = int(stage_loads(s, latency).max())
    comm = comm_cost(s, dag)
    combined = combined_value(peak, comm, dag, latency, alpha)
    if baseline is None:
        baseline = heuristic_objective(dag, latency, alpha)
    if baseline > 0:
        pct = combined / baseline * 100.0
    else:
        pct = 100.0 if combined == 0 else math.inf
    return ObjectiveBreakdown(peak, comm, combined, pct)


def heuristic_objective(dag, latency, alpha=DEFAULT_ALPHA):
    s = heuristic_schedule(dag, latency)
    return combined_value(
        int(stage_loads(s, latency).max()), comm_cost(s, dag), dag, latency, alpha
    )


def hinted_bounds(dag, latency, hint, priority=None):
    """Stage bounds after fixing the hinted nodes, dropping hints that conflict.

    Returns ``(lower, upper, kept)`` where ``kept`` is the subset of ``hint``
    that is jointly consistent with the latency bound. Conflicts are resolved
    by discarding the hint with the lowest ``priority`` (default: highest id).
    """
    earliest, latest = window_bounds(dag, latency)
    kept = {int(v): int(a) for v, a in hint.items() if earliest[v] <= a <= latest[v]}
    prio = priority or {}
    order = dag.topo_order
    while True:
        lo = earliest.copy()
        hi = latest.copy()
        for v, a in kept.items():
            lo[v] = max(lo[v], a)
            hi[v] = min(hi[v], a)
        for v in order:
            for k in dag.in_edges[v]:
                e = dag.edges[k]
                lo[v] = max(lo[v], lo[e.src] - e.diff_const)
        for v in reversed(order):
            for k in dag.out_edges[v]:
                e = dag.edges[k]
                hi[v] = min(hi[v], hi[e.dst] + e.diff_const)
        if np.all(lo <= hi):
            return lo, hi, kept
        bad = set(np.nonzero(lo > hi)[0].tolist())
        # Some hint is implicated; drop the least trusted one and retry.
        victim = min(kept, key=lambda v: (prio.get(v, 0.0), v not in bad, -v))
        del kept[victim]


def complete_schedule(dag, latency, hint=None, priority=None):
    """List scheduling in topological order, honoring a (partial) hint.

    Each unhinted node takes the feasible stage minimizing, in order, the
    current stage population, the crossing weight added toward already
    placed predecessors, and the stage index.
    """
    lo, hi, kept = hinted_bounds(dag, latency, hint or {}, priority)
    n = dag.node_count
    s = np.full(n, -1, dtype=np.int64)
    pop = np.zeros(latency, dtype=np.int64)
    for v in dag.topo_order:
        ins = dag.in_edges[v]
        a_lo = int(lo[v])
        for k in ins:
            e = dag.edges[k]
            a_lo = max(a_lo, int(s[e.src]) - e.diff_const)
        a_hi = int(hi[v])
        if a_lo > a_hi:
            raise InfeasibleError(f"empty stage range for node {v}")  # unreachable after bounds
        if v in kept:
            a = kept[v]
        elif a_lo == a_hi:
            a = a_lo
        else:
            stages = np.arange(a_lo, a_hi + 1)
            if ins:
                ps = s[dag.src[list(ins)]]
                w = dag.weight[list(ins)]
                cross = np.maximum(0, stages[:, None] - ps[None, :]) @ w
            else:
                cross = np.zeros(len(stages))
            # lexsort: last key is primary
            a = int(stages[np.lexsort((stages, cross, pop[a_lo : a_hi + 1]))[0]])
        s[v] = a
        pop[a] += 1
    return s


def heuristic_schedule(dag, latency):
    return complete_schedule(dag, latency)
