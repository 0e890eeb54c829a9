"""Depth-first branch-and-bound over stage assignments.

Nodes are branched in topological order. A node's domain is its stage
window tightened by the stages of already placed predecessors, so every
leaf satisfies the difference constraints. Values are tried in the order the
list-scheduling heuristic prefers (least populated stage, then least
crossing weight toward placed predecessors); a seed, when given, breaks the
remaining ties at random.

The bound at a search node is

    alpha * max(max committed load, ceil(|V|/L)) / ceil(|V|/L)
        + (committed crossings + per-edge crossing lower bounds) / sum w

where an edge with an unplaced endpoint contributes ``w * max(0, -c, E_j - s_i)``
(``s_i`` replaced by the latest stage of ``i`` when the source is unplaced).
"""

from __future__ import annotations

import math
import sys
import time

import numpy as np

from ..formulation import build_sdc, combined_value, comm_cost, complete_schedule, heuristic_objective
from ..formulation.objective import peak_scale
from ..warmstart import PartialSolution, consistency_filter
from .report import SolveReport, relative_gap


class _Stop(Exception):
    pass


def as_partial(warm_start, node_count):
    """A :class:`PartialSolution` from a partial or a plain ``{node: stage}`` mapping."""
    if warm_start is None or isinstance(warm_start, PartialSolution):
        return warm_start
    hint = {int(k): int(v) for k, v in dict(warm_start).items()}
    return PartialSolution(hint, {}, source_iteration=-1, node_count=node_count)


def _prune_tol(value):
    return 1e-12 * max(1.0, abs(value))


def root_bound(problem):
    """Bound of the empty assignment."""
    dag, L = problem.dag, problem.latency
    W = dag.total_weight
    comm = 0.0
    for e in dag.edges:
        comm += e.weight * max(0, -e.diff_const, int(problem.earliest[e.dst]) - int(problem.latest[e.src]))
    return problem.alpha + (comm / W if W > 0 else 0.0)


def warm_incumbent(problem, warm_start):
    """Greedy completion of a consistency-filtered hint, or ``None`` without a hint."""
    partial = as_partial(warm_start, problem.dag.node_count)
    if partial is None:
        return None
    partial = consistency_filter(partial, build_sdc(problem.dag, problem.latency))
    return complete_schedule(problem.dag, problem.latency, hint=partial.assignments, priority=partial.confidences)


def solve_internal(request):
    """Solve ``request.model`` exactly, or as far as its time budget allows.

    Returns a :class:`SolveReport`; ``status`` is ``"optimal"`` exactly when
    the search tree was exhausted. An infeasible model (some node with an
    empty stage window) yields status ``"infeasible"``.
    """
    t0 = time.perf_counter()
    pb = request.model._require_problem()
    dag, L, alpha = pb.dag, pb.latency, pb.alpha
    n = dag.node_count
    base = dict(label=request.label, seed=request.seed, hinted=request.warm_start is not None)
    if not pb.feasible:
        bad = int(np.nonzero(pb.earliest > pb.latest)[0][0])
        return SolveReport(
            status="infeasible",
            runtime=time.perf_counter() - t0,
            message=f"node {bad} has empty stage window [{pb.earliest[bad]}, {pb.latest[bad]}]",
            **base,
        )
    deadline = t0 + request.time_budget
    node_limit = request.node_limit
    baseline = request.baseline

    def objective_of(s):
        peak = int(np.bincount(s, minlength=L).max())
        return combined_value(peak, comm_cost(s, dag), dag, L, alpha)

    best = {"s": None, "obj": math.inf}
    trace = []

    def offer(s):
        obj = objective_of(s)
        if best["s"] is None or obj < best["obj"] - _prune_tol(best["obj"]):
            best["s"] = s.copy()
            best["obj"] = obj
            trace.append((time.perf_counter() - t0, obj))

    start = warm_incumbent(pb, request.warm_start)
    if start is not None:
        offer(start)

    scale = peak_scale(n, L)
    W = dag.total_weight
    inv_w = 1.0 / W if W > 0 else 0.0
    earliest = [int(v) for v in pb.earliest]
    latest = [int(v) for v in pb.latest]
    ins = [[(e.src, e.weight, e.diff_const) for e in (dag.edges[k] for k in dag.in_edges[v])] for v in range(n)]
    out_ids = [list(dag.out_edges[v]) for v in range(n)]
    in_ids = [list(dag.in_edges[v]) for v in range(n)]
    e_src = [e.src for e in dag.edges]
    e_dst = [e.dst for e in dag.edges]
    e_w = [e.weight for e in dag.edges]
    e_c = [e.diff_const for e in dag.edges]
    order = [int(v) for v in dag.topo_order]
    if request.seed is None:
        tie = None
    else:
        tie = np.random.default_rng(request.seed).random((n, L)).tolist()

    # Per-edge crossing lower bound currently counted in ``pend``.
    cur_lb = [e_w[k] * max(0, -e_c[k], earliest[e_dst[k]] - latest[e_src[k]]) for k in range(len(e_src))]
    state = {"pend": sum(cur_lb), "fixed": 0.0, "maxload": 0, "nodes": 0}
    s = np.full(n, -1, dtype=np.int64)
    sl = [-1] * n
    loads = [0] * L

    def bound():
        return alpha * max(state["maxload"], scale) / scale + (state["fixed"] + state["pend"]) * inv_w

    def dfs(depth):
        if depth == n:
            offer(s)
            return
        v = order[depth]
        lo = earliest[v]
        for p, _, c in ins[v]:
            if sl[p] - c > lo:
                lo = sl[p] - c
        hi = latest[v]
        cands = []
        for a in range(lo, hi + 1):
            cross = 0.0
            for p, w, _ in ins[v]:
                if a > sl[p]:
                    cross += w * (a - sl[p])
            cands.append((loads[a], cross, tie[v][a] if tie else a, a))
        cands.sort()
        for _, cross, _, a in cands:
            if node_limit is not None and state["nodes"] >= node_limit:
                raise _Stop
            state["nodes"] += 1
            if state["nodes"] & 255 == 0 and time.perf_counter() >= deadline:
                raise _Stop
            # commit v -> a
            sl[v] = a
            s[v] = a
            loads[a] += 1
            old_max = state["maxload"]
            if loads[a] > old_max:
                state["maxload"] = loads[a]
            saved = []
            dpend = 0.0
            for k in in_ids[v]:
                dpend -= cur_lb[k]
                saved.append((k, cur_lb[k]))
                cur_lb[k] = 0.0
            for k in out_ids[v]:
                new = e_w[k] * max(0, -e_c[k], earliest[e_dst[k]] - a)
                dpend += new - cur_lb[k]
                saved.append((k, cur_lb[k]))
                cur_lb[k] = new
            state["pend"] += dpend
            state["fixed"] += cross
            if best["s"] is None or bound() < best["obj"] - _prune_tol(best["obj"]):
                dfs(depth + 1)
            state["fixed"] -= cross
            state["pend"] -= dpend
            for k, old in reversed(saved):
                cur_lb[k] = old
            state["maxload"] = old_max
            loads[a] -= 1
            sl[v] = -1
            s[v] = -1

    limit = sys.getrecursionlimit()
    sys.setrecursionlimit(max(limit, n + 1000))
    try:
        dfs(0)
        exhausted = True
    except _Stop:
        exhausted = False
    finally:
        sys.setrecursionlimit(limit)

    runtime = time.perf_counter() - t0
    common = dict(nodes=state["nodes"], runtime=runtime, incumbent_trace=trace, **base)
    if best["s"] is None:
        # Unreachable when exhausted: windows guarantee every branch reaches a leaf.
        return SolveReport(status="timeout_no_incumbent", best_bound=root_bound(pb), **common)
    obj = best["obj"]
    bnd = obj if exhausted else min(obj, root_bound(pb))
    return SolveReport(
        status="optimal" if exhausted else "feasible",
        objective=obj,
        normalized_pct=_pct(obj, dag, L, alpha, baseline),
        best_bound=bnd,
        gap=relative_gap(obj, bnd),
        schedule=best["s"],
        **common,
    )


def _pct(obj, dag, L, alpha, baseline):
    if baseline is None:
        baseline = heuristic_objective(dag, L, alpha)
    if baseline > 0:
        return obj / baseline * 100.0
    return 100.0 if obj == 0 else math.inf
