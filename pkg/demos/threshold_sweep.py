"""How the confidence threshold trades hint size against hint quality.

For one 300-node workload, extract partial solutions from the last sampler
iteration at several thresholds and give each one the same solver node
budget. Run with ``python demos/threshold_sweep.py``.
"""

import warnings

from hybridsched import diffsched
from hybridsched.diffsched import DiffConfig
from hybridsched.formulation import build_ilp, heuristic_objective
from hybridsched.graph import generate_random_workload
from hybridsched.solvers import SolverRequest, solve_internal
from hybridsched.warmstart import EmptyPartialWarning, ThresholdPolicy, auto_threshold, extract_partial

n, L = 300, 10
dag = generate_random_workload(n, 3 / n, "uniform(1,5)", seed=1, strict_prob=0.1)
model = build_ilp(dag, L)
base = heuristic_objective(dag, L)
records = diffsched.run(dag, L, DiffConfig(iterations=30, seed=1))
print(f"pooled 70th-percentile threshold: {auto_threshold(records):.4f}")

cold = solve_internal(SolverRequest(model, seed=0, node_limit=20_000))
print(f"\ncold lane: {100 * cold.objective / base:.2f}% of heuristic")
print("\nthreshold  hinted nodes  first incumbent  final")
for q in (10, 30, 50, 70, 90, 99):
    with warnings.catch_warnings():
        warnings.simplefilter("ignore", EmptyPartialWarning)
        hint = extract_partial(records[-1], ThresholdPolicy.percentile(q))
    rep = solve_internal(SolverRequest(model, warm_start=hint, seed=0, node_limit=20_000))
    first = rep.incumbent_trace[0][1]
    print(f"  p{q:<3d} {hint.threshold:6.3f}  {len(hint):5d}        {100 * first / base:7.2f}%      "
          f"{100 * rep.objective / base:7.2f}%")
