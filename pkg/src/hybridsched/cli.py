"""``hybridsched`` command line: gen, diff, solve, hybrid, bench.

Exit codes: 0 success, 1 unexpected error, 2 configuration error,
3 infeasible instance, 4 solver backend failure, 5 no schedule within budget.
"""

from __future__ import annotations

import argparse
import json
import logging
import math
import sys
from pathlib import Path

from . import diffsched
from .bench import BenchRow, bench_instance, write_reports
from .config import ConfigError, load_config
from .errors import ExternalSolverError, GraphFormatError, InfeasibleError, RaceError
from .formulation import build_ilp, heuristic_objective
from .graph import generate_random_workload, parse_graph
from .pipeline import extract_partials, lane_threads, run_hybrid
from .solvers import race
from .warmstart import PartialSolution, threshold_analysis

logger = logging.getLogger("hybridsched")

EXIT_OK, EXIT_ERROR, EXIT_CONFIG, EXIT_INFEASIBLE, EXIT_BACKEND, EXIT_NO_SCHEDULE = 0, 1, 2, 3, 4, 5

_FORMATS = {".json": "json", ".dot": "dot", ".gv": "dot"}
_EXT = {"json": ".json", "dot": ".dot", "edgelist": ".txt"}


# ---------------------------------------------------------------------------
# Argument plumbing
# ---------------------------------------------------------------------------

# flag -> RunConfig field
_CONFIG_FLAGS = {
    "latency": ("--latency", int),
    "lam": ("--lam", float),
    "alpha": ("--alpha", float),
    "iterations": ("--iters", int),
    "learning_rate": ("--lr", float),
    "temperature": ("--temperature", float),
    "temperature_end": ("--temperature-end", float),
    "entropy_sign": ("--entropy-sign", str),
    "threshold": ("--threshold", str),
    "lanes": ("--lanes", str),
    "budget": ("--budget", float),
    "cold_budget": ("--cold-budget", float),
    "cold_ratio": ("--cold-ratio", float),
    "cold_lanes": ("--cold-lanes", int),
    "threads": ("--threads", int),
    "seed": ("--seed", int),
    "node_limit": ("--node-limit", int),
    "backend": ("--backend", str),
    "solver_cmd": ("--solver-cmd", str),
    "keep_artifacts": ("--keep-artifacts", str),
    "out": ("--out", str),
}


def _add_config_flags(p):
    p.add_argument("--config", help="key = value run configuration file")
    for key, (flag, kind) in _CONFIG_FLAGS.items():
        p.add_argument(flag, dest=key, type=kind, default=None)


def _add_graph_flags(p, positional=True):
    if positional:
        p.add_argument("graph", nargs="?", help="graph file (.json, .dot, or edge list)")
    p.add_argument("--format", choices=["json", "dot", "edgelist"], help="graph file format")
    p.add_argument("--nodes", type=int, help="generate a random workload with this many nodes")
    p.add_argument("--density", type=float, help="edge probability (default 3/nodes)")
    p.add_argument("--weights", default="uniform(1,5)", help="weight distribution")
    p.add_argument("--strict-prob", type=float, default=0.0, help="share of strict (c=-1) edges")
    p.add_argument("--graph-seed", type=int, help="generator seed (default: --seed)")


def _config(args):
    overrides = {k: getattr(args, k, None) for k in _CONFIG_FLAGS}
    return load_config(args.config, overrides)


def _density(args):
    return args.density if args.density is not None else min(1.0, 3.0 / max(args.nodes, 1))


def _load_graph(args, cfg):
    if getattr(args, "graph", None):
        path = Path(args.graph)
        fmt = args.format or _FORMATS.get(path.suffix.lower(), "edgelist")
        try:
            return parse_graph(path.read_bytes(), fmt), path.stem
        except OSError as exc:
            raise ConfigError(f"cannot read graph {path}: {exc}") from None
    if args.nodes is None:
        raise ConfigError("give a graph file or --nodes to generate one")
    seed = args.graph_seed if args.graph_seed is not None else cfg.seed
    try:
        dag = generate_random_workload(args.nodes, _density(args), args.weights, seed, args.strict_prob)
    except ValueError as exc:
        raise ConfigError(f"bad generator settings: {exc}") from None
    return dag, f"rw{args.nodes}_s{seed}"


def _run_dir(cfg, command):
    out = Path(cfg.out) if cfg.out else Path("runs") / command
    out.mkdir(parents=True, exist_ok=True)
    (out / "run_config.txt").write_text(cfg.replace(out=str(out)).to_text())
    return out


def _emit(obj):
    print(json.dumps(obj, indent=2, default=_json_default))


def _json_default(v):
    if isinstance(v, Path):
        return str(v)
    if hasattr(v, "tolist"):
        return v.tolist()
    raise TypeError(type(v).__name__)


def _finite(x):
    return x if isinstance(x, (int, float)) and math.isfinite(x) else None


# ---------------------------------------------------------------------------
# Commands
# ---------------------------------------------------------------------------


def cmd_gen(args):
    out = Path(args.out or "graphs")
    out.mkdir(parents=True, exist_ok=True)
    paths = []
    for k in range(args.count):
        seed = args.seed + k
        dag = generate_random_workload(args.nodes, _density(args), args.weights, seed, args.strict_prob)
        text = {"json": dag.to_json, "dot": dag.to_dot, "edgelist": dag.to_edgelist}[args.format]()
        path = out / f"rw{args.nodes}_s{seed}{_EXT[args.format]}"
        path.write_text(text if text.endswith("\n") else text + "\n")
        paths.append(str(path))
    _emit({"graphs": paths})
    return EXIT_OK


def _write_diff_artifacts(out, dag, records, partials, cfg):
    (out / "graph.json").write_text(dag.to_json() + "\n")
    (out / "records.jsonl").write_text(diffsched.records_to_jsonl(records))
    (out / "loss.csv").write_text(diffsched.loss_trace_csv(records))
    (out / "timing.csv").write_text(
        "iteration,wall_time\n" + "".join(f"{r.iteration},{r.wall_time!r}\n" for r in records)
    )
    pdir = out / "partials"
    pdir.mkdir(exist_ok=True)
    for old in pdir.glob("*.json"):
        old.unlink()
    for p in partials:
        (pdir / f"iter_{p.source_iteration:03d}.json").write_text(p.to_json() + "\n")
    policy = cfg.threshold_policy()
    q = policy.value if policy.mode == "percentile" else 70.0
    ta = threshold_analysis(records, q=q)
    lines = ["bin_lo,bin_hi,count"]
    lines += [f"{ta['edges'][k]!r},{ta['edges'][k + 1]!r},{c}" for k, c in enumerate(ta["counts"])]
    (out / "confidence_hist.csv").write_text("\n".join(lines) + "\n")
    lines = ["iteration,top_mean"] + [f"{it},{m!r}" for it, m in ta["top_mean"]]
    (out / "confidence_top_mean.csv").write_text("\n".join(lines) + "\n")
    return ta


def cmd_diff(args):
    cfg = _config(args)
    dag, name = _load_graph(args, cfg)
    model = build_ilp(dag, cfg.latency, cfg.alpha)
    out = _run_dir(cfg, "diff")
    records = diffsched.run(dag, cfg.latency, cfg.diff_config())
    partials = extract_partials(records, dag, cfg, model)
    ta = _write_diff_artifacts(out, dag, records, partials, cfg)
    _emit({
        "instance": name,
        "run_dir": out,
        "iterations": len(records),
        "final_loss": records[-1].loss,
        "auto_threshold": ta["threshold"],
        "partials": len(partials),
        "hint_nodes": [len(p) for p in partials],
    })
    return EXIT_OK


def _read_partials(directory):
    pdir = Path(directory)
    if not pdir.is_dir():
        raise ConfigError(f"partial directory {pdir} does not exist")
    parts = []
    for path in sorted(pdir.glob("*.json")):
        try:
            parts.append(PartialSolution.from_json(path.read_text()))
        except (ValueError, KeyError) as exc:
            raise ConfigError(f"bad partial file {path}: {exc}") from None
    return parts


def _race_summary(res, baseline):
    best = res.best
    return {
        "J_star": _finite(res.J_star),
        "normalized_pct": _finite(100.0 * res.J_star / baseline) if baseline > 0 else None,
        "gap": _finite(best.gap),
        "status": best.status,
        "best_lane": best.label,
        "lanes": [
            {"label": r.label, "status": r.status, "objective": _finite(r.objective), "nodes": r.nodes}
            for r in res.reports
        ],
        "failures": [list(f) for f in res.failures],
    }


def _race_exit(res):
    if math.isfinite(res.J_star):
        return EXIT_OK
    if any(r.status == "infeasible" for r in res.reports):
        return EXIT_INFEASIBLE
    return EXIT_NO_SCHEDULE


def cmd_solve(args):
    cfg = _config(args)
    dag, name = _load_graph(args, cfg)
    model = build_ilp(dag, cfg.latency, cfg.alpha)
    partials = _read_partials(args.partials) if args.partials else []
    cold = cfg.cold_lanes or 0
    if not partials:
        logger.warning("no partial solutions found; running a cold race")
        cold = max(cold, 1)
    out = _run_dir(cfg, "solve")
    baseline = heuristic_objective(dag, cfg.latency, cfg.alpha)
    res = race(
        model, partials, cfg.budget, backend=cfg.solver_backend(),
        threads=lane_threads(cfg, len(partials) + cold), cold_lanes=cold, seed=cfg.seed,
        node_limit=cfg.node_limit, baseline=baseline,
    )
    summary = {"instance": name, "run_dir": out, "baseline": baseline, **_race_summary(res, baseline)}
    (out / "report.json").write_text(json.dumps(res.to_dict(), indent=1, default=_json_default) + "\n")
    if res.best.has_solution:
        (out / "schedule.json").write_text(json.dumps(res.best.schedule.tolist()) + "\n")
    _emit(summary)
    return _race_exit(res)


def cmd_hybrid(args):
    cfg = _config(args)
    dag, name = _load_graph(args, cfg)
    model = build_ilp(dag, cfg.latency, cfg.alpha)
    out = _run_dir(cfg, "hybrid")
    res = run_hybrid(dag, cfg, cold=not args.no_cold, model=model)
    _write_diff_artifacts(out, dag, res.records, res.partials, cfg)
    summary = {
        "instance": name,
        "run_dir": out,
        "baseline": res.baseline,
        "diff_objective": res.diff_objective,
        "diff_pct": res.diff_pct,
        "warm": _race_summary(res.warm, res.baseline),
    }
    if res.cold is not None:
        summary["cold"] = _race_summary(res.cold, res.baseline)
    summary["J_star"] = summary["warm"]["J_star"]
    summary["normalized_pct"] = summary["warm"]["normalized_pct"]
    summary["gap"] = summary["warm"]["gap"]
    (out / "report.json").write_text(json.dumps(summary, indent=1, default=_json_default) + "\n")
    (out / "timing.json").write_text(json.dumps(res.timing, indent=1) + "\n")
    _emit({**summary, "timing": res.timing})
    return _race_exit(res.warm)


def _bench_instances(args, cfg):
    if args.graphs:
        for g in args.graphs:
            path = Path(g)
            fmt = args.format or _FORMATS.get(path.suffix.lower(), "edgelist")
            try:
                yield path.stem, parse_graph(path.read_bytes(), fmt)
            except (OSError, GraphFormatError) as exc:
                yield path.stem, exc
        return
    if not args.sizes:
        raise ConfigError("bench needs --graphs or --sizes")
    for n in args.sizes:
        for s in args.instance_seeds:
            p = args.density if args.density is not None else min(1.0, 3.0 / n)
            yield f"rw{n}_s{s}", generate_random_workload(n, p, args.weights, s, args.strict_prob)


def cmd_bench(args):
    cfg = _config(args)
    out = _run_dir(cfg, "bench")
    rows = []
    for name, dag in _bench_instances(args, cfg):
        if isinstance(dag, Exception):
            rows.append(BenchRow(name, 0, 0, error=f"{type(dag).__name__}: {dag}"))
            continue
        logger.info("bench instance %s (%d nodes)", name, dag.node_count)
        rows.append(bench_instance(name, dag, cfg, replay_budget=args.replay_budget))
    paths = write_reports(rows, out, plots=not args.no_plots)
    _emit({"run_dir": out, "rows": len(rows), "failed": sum(bool(r.error) for r in rows),
           "files": {k: str(v) for k, v in paths.items()}})
    return EXIT_OK


# ---------------------------------------------------------------------------
# Entry point
# ---------------------------------------------------------------------------


def _int_list(text):
    try:
        return [int(t) for t in text.split(",") if t.strip()]
    except ValueError:
        raise argparse.ArgumentTypeError(f"expected comma-separated integers, got {text!r}") from None


def build_parser():
    ap = argparse.ArgumentParser(prog="hybridsched", description=__doc__.splitlines()[0])
    ap.add_argument("-v", "--verbose", action="count", default=0)
    sub = ap.add_subparsers(dest="command", required=True)

    p = sub.add_parser("gen", help="write random workload graphs")
    p.add_argument("--nodes", type=int, required=True)
    p.add_argument("--density", type=float)
    p.add_argument("--weights", default="uniform(1,5)")
    p.add_argument("--strict-prob", type=float, default=0.0)
    p.add_argument("--seed", type=int, default=0)
    p.add_argument("--count", type=int, default=1)
    p.add_argument("--format", choices=["json", "dot", "edgelist"], default="json")
    p.add_argument("--out", help="output directory (default graphs/)")
    p.set_defaults(func=cmd_gen)

    p = sub.add_parser("diff", help="run the relaxation and dump records and partials")
    _add_graph_flags(p)
    _add_config_flags(p)
    p.set_defaults(func=cmd_diff)

    p = sub.add_parser("solve", help="race solver lanes warm-started from partial files")
    _add_graph_flags(p)
    _add_config_flags(p)
    p.add_argument("--partials", help="directory of partial-solution JSON files")
    p.set_defaults(func=cmd_solve)

    p = sub.add_parser("hybrid", help="relaxation followed by warm and cold races")
    _add_graph_flags(p)
    _add_config_flags(p)
    p.add_argument("--no-cold", action="store_true", help="skip the cold baseline race")
    p.set_defaults(func=cmd_hybrid)

    p = sub.add_parser("bench", help="benchmark sweep with table and figure data")
    _add_graph_flags(p, positional=False)
    _add_config_flags(p)
    p.add_argument("--graphs", nargs="*", help="graph files to benchmark")
    p.add_argument("--sizes", type=_int_list, help="generated instance sizes, e.g. 200,300")
    p.add_argument("--instance-seeds", type=_int_list, default=[0])
    p.add_argument("--replay-budget", type=float, default=0.0,
                   help="per-iteration single-lane budget for the iteration-order data (0: skip)")
    p.add_argument("--no-plots", action="store_true")
    p.set_defaults(func=cmd_bench)
    return ap


def main(argv=None):
    args = build_parser().parse_args(argv)
    logging.basicConfig(
        level=logging.WARNING - 10 * min(args.verbose, 2),
        format="%(levelname)s %(name)s: %(message)s",
        stream=sys.stderr,
    )
    try:
        return args.func(args)
    except (ConfigError, GraphFormatError) as exc:
        logger.error("%s", exc)
        return EXIT_CONFIG
    except InfeasibleError as exc:
        logger.error("infeasible: %s", exc)
        return EXIT_INFEASIBLE
    except (ExternalSolverError, RaceError) as exc:
        logger.error("solver backend failed: %s", exc)
        return EXIT_BACKEND


if __name__ == "__main__":
    sys.exit(main())
