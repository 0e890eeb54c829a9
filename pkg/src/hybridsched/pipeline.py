"""Two-stage runs: relaxation, hint extraction, then warm and cold races."""

from __future__ import annotations

import logging
import time
from dataclasses import dataclass, field

from . import diffsched
from .formulation import build_ilp, evaluate_objective, heuristic_objective
from .solvers import race
from .warmstart import COVERAGE_BAND, extract_partial, hinted_variable_fraction

logger = logging.getLogger(__name__)


@dataclass
class HybridResult:
    records: list
    partials: list
    baseline: float
    diff_objective: float
    warm: object = None
    cold: object = None
    timing: dict = field(default_factory=dict)

    @property
    def diff_pct(self):
        return 100.0 * self.diff_objective / self.baseline if self.baseline > 0 else float("nan")

    def summary(self):
        out = {
            "baseline": self.baseline,
            "diff_objective": self.diff_objective,
            "diff_pct": self.diff_pct,
            "lanes": len(self.partials),
            "hint_nodes": [len(p) for p in self.partials],
        }
        for kind, res in (("warm", self.warm), ("cold", self.cold)):
            if res is None:
                continue
            best = res.best
            out[kind] = {
                "J_star": res.J_star,
                "normalized_pct": 100.0 * res.J_star / self.baseline if self.baseline > 0 else None,
                "gap": best.gap,
                "status": best.status,
                "best_lane": best.label,
                "failures": len(res.failures),
            }
        return out


def sampled_objectives(records, dag, latency, alpha, baseline=None):
    """Combined objective of every record's sampled schedule."""
    return [evaluate_objective(r.schedule, dag, latency, alpha, baseline=baseline or 1.0).combined for r in records]


def select_records(records, mode, k, objectives=None):
    """Iterations feeding the warm lanes, in lane order."""
    if mode == "all":
        return list(records)
    if mode == "last":
        return list(records[-k:])
    # Stable: earlier iteration wins on equal objective.
    order = sorted(range(len(records)), key=lambda i: (objectives[i], i))
    return [records[i] for i in order[:k]]


def extract_partials(records, dag, cfg, model=None):
    mode, k = cfg.lane_selection()
    objs = sampled_objectives(records, dag, cfg.latency, cfg.alpha) if mode == "best" else None
    chosen = select_records(records, mode, k, objs)
    policy = cfg.threshold_policy()
    parts = [extract_partial(r, policy) for r in chosen]
    if model is not None and parts:
        fracs = [hinted_variable_fraction(p, model) for p in parts]
        outside = sum(not COVERAGE_BAND[0] <= f <= COVERAGE_BAND[1] for f in fracs)
        if outside:
            logger.warning(
                "%d of %d hints assign a variable share outside %.0f-%.0f%% (range %.1f-%.1f%%)",
                outside, len(parts), 100 * COVERAGE_BAND[0], 100 * COVERAGE_BAND[1],
                100 * min(fracs), 100 * max(fracs),
            )
    return parts


def lane_threads(cfg, lanes):
    return cfg.threads if cfg.threads > 0 else max(1, lanes)


def run_hybrid(dag, cfg, cold=True, model=None):
    """Relaxation, warm race over the extracted hints and (optionally) the cold race."""
    L = cfg.latency
    model = model or build_ilp(dag, L, cfg.alpha)
    baseline = heuristic_objective(dag, L, cfg.alpha)
    t0 = time.perf_counter()
    records = diffsched.run(dag, L, cfg.diff_config())
    t_diff = time.perf_counter() - t0
    diff_obj = evaluate_objective(records[-1].schedule, dag, L, cfg.alpha, baseline=baseline).combined
    partials = extract_partials(records, dag, cfg, model)
    backend = cfg.solver_backend()
    res = HybridResult(records, partials, baseline, diff_obj)
    t0 = time.perf_counter()
    res.warm = race(
        model, partials, cfg.budget, backend=backend, threads=lane_threads(cfg, len(partials)),
        seed=cfg.seed, node_limit=cfg.node_limit, baseline=baseline,
    )
    t_warm = time.perf_counter() - t0
    t_cold = 0.0
    if cold:
        lanes = cfg.cold_lanes if cfg.cold_lanes is not None else max(1, len(partials))
        t0 = time.perf_counter()
        res.cold = race(
            model, [], cfg.resolved_cold_budget, backend=backend, threads=lane_threads(cfg, lanes),
            cold_lanes=lanes, seed=cfg.seed, node_limit=cfg.node_limit, baseline=baseline,
        )
        t_cold = time.perf_counter() - t0
    res.timing = {
        "diff_seconds": t_diff,
        "diff_seconds_per_iter": t_diff / len(records),
        "warm_seconds": t_warm,
        "cold_seconds": t_cold,
    }
    return res

