"""Minimal file-driven MILP solver on top of ``scipy.optimize.milp`` (HiGHS).

Usage::

    python -m hybridsched.solvers.milp_cli MODEL.mps START TIMELIMIT SOLUTION

Writes ``# status <optimal|feasible|infeasible|...>`` followed by one
``<varname> <value>`` line per column. The start file is accepted for
interface compatibility; scipy exposes no MIP-start hook, so it is only
reported on stderr.
"""

from __future__ import annotations

import argparse
import sys

import numpy as np
from scipy.optimize import Bounds, LinearConstraint, milp

from ..formulation import parse_mps


def solve_file(model_path, start_path, timelimit, solution_path):
    with open(model_path) as fh:
        model = parse_mps(fh.read())
    if start_path:
        try:
            with open(start_path) as fh:
                hinted = sum(1 for line in fh if line.strip())
        except OSError:
            hinted = 0
        if hinted:
            print(f"ignoring {hinted} start values (no MIP-start support)", file=sys.stderr)
    lo = np.where(np.array(model.senses) == "L", -np.inf, model.rhs)
    hi = np.where(np.array(model.senses) == "G", np.inf, model.rhs)
    cons = [LinearConstraint(model.A, lo, hi)] if model.num_rows else []
    res = milp(
        model.obj,
        constraints=cons,
        integrality=model.integer.astype(int),
        bounds=Bounds(model.lb, model.ub),
        options={"time_limit": float(timelimit), "mip_rel_gap": 0.0},
    )
    if res.status == 0:
        status = "optimal"
    elif res.x is not None:
        status = "feasible"
    elif res.status == 2:
        status = "infeasible"
    else:
        status = "unknown"
    lines = [f"# status {status}"]
    if res.x is not None:
        x = np.where(model.integer, np.round(res.x), res.x)
        lines += [f"{nm} {v:.12g}" for nm, v in zip(model.var_names, x)]
    with open(solution_path, "w") as fh:
        fh.write("\n".join(lines) + "\n")
    return status


def main(argv=None):
    ap = argparse.ArgumentParser(prog="python -m hybridsched.solvers.milp_cli")
    ap.add_argument("model")
    ap.add_argument("start")
    ap.add_argument("timelimit", type=float)
    ap.add_argument("solution")
    args = ap.parse_args(argv)
    solve_file(args.model, args.start, args.timelimit, args.solution)
    return 0


if __name__ == "__main__":
    sys.exit(main())
