"""Benchmark sweeps: per-instance comparison tables and plot data files.

Timing-free outputs (``comparison.csv``, per-plot CSVs) are byte-identical across
reruns when the search is node-limited; timing lives in ``model_stats.csv``.
"""

from __future__ import annotations

import csv
import logging
import math
from dataclasses import dataclass, field
from pathlib import Path

import numpy as np

from .formulation import build_ilp, evaluate_objective
from .pipeline import run_hybrid
from .solvers import race
from .warmstart import extract_partial, threshold_analysis

logger = logging.getLogger(__name__)

COMPARISON_COLUMNS = [
    "instance", "nodes", "edges", "constraints",
    "diff_pct", "cold_pct", "warm_pct", "delta1", "delta2", "error",
]
MODEL_STATS_COLUMNS = ["instance", "nodes", "edges", "constraints", "t_iter_ms"]


@dataclass
class BenchRow:
    instance: str
    nodes: int
    edges: int
    constraints: int = 0
    diff_pct: float = math.nan
    cold_pct: float = math.nan
    warm_pct: float = math.nan
    t_iter_ms: float = math.nan
    error: str = ""
    hist: tuple = ()
    top_mean: list = field(default_factory=list)
    replay: list = field(default_factory=list)

    @property
    def delta1(self):
        return self.warm_pct - self.diff_pct

    @property
    def delta2(self):
        return self.warm_pct - self.cold_pct


def _fmt(v):
    if isinstance(v, float):
        return "" if math.isnan(v) else repr(v)
    return str(v)


def _pct(value, baseline):
    return 100.0 * value / baseline if baseline > 0 else math.nan


def bench_instance(name, dag, cfg, replay_budget=0.0, bins=20):
    """One sweep row; failures are recorded in ``error`` rather than raised."""
    row = BenchRow(name, dag.node_count, dag.edge_count)
    try:
        model = build_ilp(dag, cfg.latency, cfg.alpha)
        row.constraints = model.num_rows
        res = run_hybrid(dag, cfg, cold=True, model=model)
        row.diff_pct = res.diff_pct
        row.warm_pct = _pct(res.warm.J_star, res.baseline)
        row.cold_pct = _pct(res.cold.J_star, res.baseline)
        row.t_iter_ms = 1000.0 * res.timing["diff_seconds_per_iter"]
        q = cfg.threshold_policy().value if cfg.threshold_policy().mode == "percentile" else 70.0
        ta = threshold_analysis(res.records, q=q, bins=bins)
        row.hist = (ta["edges"], ta["counts"])
        row.top_mean = ta["top_mean"]
        if replay_budget > 0:
            row.replay = replay_iterations(model, res, cfg, replay_budget)
    except Exception as exc:  # sweep continues past a bad instance
        logger.warning("instance %s failed: %s", name, exc)
        row.error = f"{type(exc).__name__}: {exc}"
    return row


def replay_iterations(model, result, cfg, budget):
    """Single warm lane per iteration, in iteration order: ``(iteration, sampled_pct, warm_pct)``."""
    pb = model.problem
    policy = cfg.threshold_policy()
    out = []
    for rec in result.records:
        sampled = evaluate_objective(rec.schedule, pb.dag, pb.latency, pb.alpha, baseline=result.baseline)
        part = extract_partial(rec, policy)
        rr = race(model, [part], budget, backend=cfg.solver_backend(), seed=cfg.seed,
                  node_limit=cfg.node_limit, baseline=result.baseline)
        out.append((rec.iteration, sampled.normalized_pct, _pct(rr.J_star, result.baseline)))
    return out


def _write_csv(path, header, rows):
    with open(path, "w", newline="") as fh:
        w = csv.writer(fh, lineterminator="\n")
        w.writerow(header)
        for r in rows:
            w.writerow([_fmt(v) for v in r])


def write_reports(rows, outdir, plots=True):
    """Write every CSV (and SVG when ``plots``); returns the written paths."""
    out = Path(outdir)
    out.mkdir(parents=True, exist_ok=True)
    paths = {}
    paths["comparison"] = out / "comparison.csv"
    _write_csv(paths["comparison"], COMPARISON_COLUMNS, [
        [r.instance, r.nodes, r.edges, r.constraints, r.diff_pct, r.cold_pct, r.warm_pct,
         r.delta1, r.delta2, r.error] for r in rows
    ])
    paths["model_stats"] = out / "model_stats.csv"
    _write_csv(paths["model_stats"], MODEL_STATS_COLUMNS,
               [[r.instance, r.nodes, r.edges, r.constraints, r.t_iter_ms] for r in rows])
    paths["confidence_hist"] = out / "confidence_hist.csv"
    hist_rows = []
    for r in rows:
        if r.hist:
            edges, counts = r.hist
            hist_rows += [[r.instance, float(edges[k]), float(edges[k + 1]), int(c)] for k, c in enumerate(counts)]
    _write_csv(paths["confidence_hist"], ["instance", "bin_lo", "bin_hi", "count"], hist_rows)
    paths["confidence_top_mean"] = out / "confidence_top_mean.csv"
    _write_csv(paths["confidence_top_mean"], ["instance", "iteration", "top_mean"],
               [[r.instance, it, m] for r in rows for it, m in r.top_mean])
    paths["objective_by_instance"] = out / "objective_by_instance.csv"
    _write_csv(paths["objective_by_instance"], ["instance", "diff_pct", "cold_pct", "warm_pct"],
               [[r.instance, r.diff_pct, r.cold_pct, r.warm_pct] for r in rows])
    paths["objective_by_iteration"] = out / "objective_by_iteration.csv"
    _write_csv(paths["objective_by_iteration"], ["instance", "iteration", "sampled_pct", "warm_pct"],
               [[r.instance, it, s, w] for r in rows for it, s, w in r.replay])
    if plots:
        paths.update(render_plots(rows, out))
    return paths


def render_plots(rows, out):
    """Small SVG renderings of the figure data."""
    import matplotlib

    matplotlib.use("Agg")
    import matplotlib.pyplot as plt

    plt.rcParams["svg.hashsalt"] = "hybridsched"
    meta = {"Date": None}
    paths = {}

    fig, ax = plt.subplots(figsize=(6, 3.5))
    x = np.arange(len(rows))
    for key, mark in (("diff_pct", "s"), ("cold_pct", "o"), ("warm_pct", "^")):
        ax.plot(x, [getattr(r, key) for r in rows], mark + "-", label=key.split("_")[0])
    ax.set_xticks(x, [r.instance for r in rows], rotation=45, ha="right", fontsize=7)
    ax.set_ylabel("objective (% of heuristic)")
    ax.legend()
    fig.tight_layout()
    paths["objective_by_instance_svg"] = out / "objective_by_instance.svg"
    fig.savefig(paths["objective_by_instance_svg"], metadata=meta)
    plt.close(fig)

    withhist = [r for r in rows if r.hist]
    if withhist:
        r = withhist[0]
        edges, counts = r.hist
        fig, (a1, a2) = plt.subplots(1, 2, figsize=(8, 3))
        a1.bar(edges[:-1], counts, width=np.diff(edges), align="edge")
        a1.set_xlabel("confidence")
        a1.set_ylabel("count")
        a2.plot([it for it, _ in r.top_mean], [m for _, m in r.top_mean], "o-")
        a2.set_xlabel("iteration")
        a2.set_ylabel("mean top confidence")
        fig.suptitle(r.instance)
        fig.tight_layout()
        paths["confidence_svg"] = out / "confidence.svg"
        fig.savefig(paths["confidence_svg"], metadata=meta)
        plt.close(fig)

    withreplay = [r for r in rows if r.replay]
    if withreplay:
        fig, ax = plt.subplots(figsize=(6, 3.5))
        for r in withreplay:
            ax.plot([it for it, _, _ in r.replay], [w for _, _, w in r.replay], ".-", label=r.instance)
        ax.set_xlabel("iteration")
        ax.set_ylabel("warm objective (% of heuristic)")
        ax.legend(fontsize=7)
        fig.tight_layout()
        paths["objective_by_iteration_svg"] = out / "objective_by_iteration.svg"
        fig.savefig(paths["objective_by_iteration_svg"], metadata=meta)
        plt.close(fig)
    return paths
