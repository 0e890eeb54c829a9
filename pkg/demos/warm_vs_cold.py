"""Warm and cold lanes raced side by side on a few generated workloads.

Lanes are capped by search nodes rather than seconds, so the numbers do not
depend on machine speed. Run with ``python demos/warm_vs_cold.py``.
"""

from hybridsched import RunConfig, generate_random_workload, run_hybrid

cfg = RunConfig(latency=10, lanes="best:5", cold_ratio=1.0, node_limit=20_000, threads=1)
print("  n   diff%   warm%   cold%")
for seed, n in enumerate((200, 300, 400)):
    dag = generate_random_workload(n, 3 / n, "uniform(1,5)", seed=seed, strict_prob=0.1)
    res = run_hybrid(dag, cfg.replace(seed=seed))
    pct = 100 / res.baseline
    print(f"{n:4d} {res.diff_pct:7.2f} {res.warm.J_star * pct:7.2f} {res.cold.J_star * pct:7.2f}")
