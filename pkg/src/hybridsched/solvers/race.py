"""Race independent solver lanes and keep the best objective."""

from __future__ import annotations

import concurrent.futures as cf
import logging
import math
import multiprocessing

from ..errors import HybridSchedError, RaceError
from ..formulation import heuristic_objective
from .bnb import solve_internal
from .external import solve_external
from .report import RaceResult, SolverRequest

logger = logging.getLogger(__name__)

#: Extra seconds granted to a lane beyond its budget before the racer gives up on it.
JOIN_GRACE = 30.0


def solve(request):
    """Dispatch ``request`` to the internal or external backend."""
    if request.backend == "internal":
        return solve_internal(request)
    return solve_external(request)


def _lane(request):
    try:
        return solve(request), None
    except HybridSchedError as exc:
        return None, f"{type(exc).__name__}: {exc}"


def lane_requests(model, partials, budget, backend="internal", cold_lanes=0, seed=0, node_limit=None, baseline=None):
    """One request per partial (``warm-k``) plus ``cold_lanes`` unhinted lanes (``cold-k``).

    Lane ``k`` of either kind gets seed ``seed + k``, so a warm lane and the
    cold lane with the same index share their search order.
    """
    if baseline is None and model.problem is not None and model.problem.feasible:
        pb = model.problem
        baseline = heuristic_objective(pb.dag, pb.latency, pb.alpha)
    common = dict(time_budget=budget, backend=backend, node_limit=node_limit, baseline=baseline)
    reqs = [
        SolverRequest(model, warm_start=p, seed=seed + k, label=f"warm-{k}", **common)
        for k, p in enumerate(partials)
    ]
    reqs += [SolverRequest(model, seed=seed + k, label=f"cold-{k}", **common) for k in range(cold_lanes)]
    return reqs


def run_lanes(requests, threads=1):
    """Run requests on ``threads`` worker processes; returns ``(reports, failures)`` in lane order."""
    if threads < 1:
        raise ValueError("threads must be >= 1")
    if not requests:
        raise ValueError("race needs at least one lane")
    if threads == 1 or len(requests) == 1:
        outcomes = [_lane(r) for r in requests]
    else:
        budget = max(r.time_budget for r in requests)
        ctx = multiprocessing.get_context("fork") if "fork" in multiprocessing.get_all_start_methods() else None
        pool = cf.ProcessPoolExecutor(max_workers=min(threads, len(requests)), mp_context=ctx)
        try:
            futures = [pool.submit(_lane, r) for r in requests]
            # Lanes queue when there are more lanes than workers.
            waves = math.ceil(len(requests) / min(threads, len(requests)))
            done, _ = cf.wait(futures, timeout=waves * (budget + JOIN_GRACE))
            outcomes = []
            for f in futures:
                if f not in done:
                    outcomes.append((None, "lane did not finish before the join deadline"))
                elif f.exception() is not None:
                    outcomes.append((None, f"worker crashed: {f.exception()!r}"))
                else:
                    outcomes.append(f.result())
        finally:
            pool.shutdown(wait=False, cancel_futures=True)
    reports, failures = [], []
    for req, (rep, err) in zip(requests, outcomes):
        if err is None:
            reports.append(rep)
        else:
            logger.warning("lane %s failed: %s", req.label, err)
            failures.append((req.label, err))
    return reports, failures


def aggregate(reports, failures=()):
    """:class:`RaceResult` with ``J_star`` the minimum objective over lanes holding a schedule."""
    failures = list(failures)
    if not reports:
        raise RaceError(
            "all solver lanes failed:\n" + "\n".join(f"  {lab}: {msg}" for lab, msg in failures),
            diagnostics=failures,
        )
    solved = [k for k, r in enumerate(reports) if r.has_solution]
    if solved:
        best = min(solved, key=lambda k: (reports[k].objective, k))
        return RaceResult(reports, best, reports[best].objective, failures)
    return RaceResult(reports, 0, math.inf, failures)


def race(model, partials, budget, backend="internal", threads=1, cold_lanes=0, seed=0, node_limit=None, baseline=None):
    """Solve ``model`` once per partial solution (plus optional cold lanes), in parallel.

    Parameters
    ----------
    model : IlpModel
    partials : list of PartialSolution or ``{node: stage}`` mappings
        One hinted lane each.
    budget : float
        Wall-clock seconds per lane.
    backend : ``"internal"`` or ExternalBackend
    threads : int
        Worker processes. Lanes beyond ``threads`` wait for a free worker.
    cold_lanes : int
        Additional unhinted, differently seeded lanes.
    node_limit : int, optional
        Per-lane search-node cap; makes internal results independent of timing.

    Returns
    -------
    RaceResult
    """
    reqs = lane_requests(model, list(partials), budget, backend, cold_lanes, seed, node_limit, baseline)
    return aggregate(*run_lanes(reqs, threads))
