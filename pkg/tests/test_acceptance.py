"""Acceptance criteria, one group per criterion.

Each test is tagged ``acceptance(n)``; the terminal summary prints one
``AC<n> PASS/FAIL`` line per criterion.
"""

import math
import time
import warnings
from pathlib import Path

import numpy as np
import pytest
from hypothesis import given, settings
from hypothesis import strategies as st

from conftest import strict_chain
from hybridsched import diffsched
from hybridsched.diffsched import DiffConfig, constrained_sample, forward_pass, gradient, mask_leq, relaxed_loss
from hybridsched.errors import InfeasibleError
from hybridsched.formulation import (
    build_ilp,
    build_sdc,
    comm_cost,
    emit_mip_start,
    emit_mps,
    evaluate_objective,
    heuristic_objective,
    heuristic_schedule,
    parse_mps,
    same_model,
)
from hybridsched.graph import Dag, Edge, generate_random_workload
from hybridsched.pipeline import sampled_objectives, select_records
from hybridsched.solvers import SolverRequest, race, solve_internal
from hybridsched.warmstart import EmptyPartialWarning, ThresholdPolicy, auto_threshold, extract_partial, nearest_rank
from oracles import brute_force_optimum, exact_objective, small_instance

GOLDEN = Path(__file__).parent / "golden"


# -- instance families ----------------------------------------------------------


def sampler_instances():
    """100 feasible DAGs with at most 100 nodes, mixed c in {0, -1}, for L = 10."""
    out, seed = [], 0
    while len(out) < 100:
        rng = np.random.default_rng(10_000 + seed)
        n = int(rng.integers(2, 101))
        dag = generate_random_workload(n, float(rng.uniform(1, 4)) / n, "uniform(1,5)",
                                       seed=seed, strict_prob=float(rng.uniform(0.05, 0.5)))
        seed += 1
        try:
            build_sdc(dag, 10)
        except InfeasibleError:
            continue
        out.append(dag)
    return out


def desk_instances():
    """30 desk-scale feasible instances ``(dag, L)``."""
    out, seed = [], 0
    while len(out) < 30:
        rng = np.random.default_rng(20_000 + seed)
        n = int(rng.integers(6, 13))
        L = int(rng.integers(3, 6))
        dag = generate_random_workload(n, float(rng.uniform(0.15, 0.4)), "uniform(1,5)",
                                       seed=seed, strict_prob=float(rng.uniform(0, 0.3)))
        seed += 1
        try:
            build_sdc(dag, L)
        except InfeasibleError:
            continue
        out.append((dag, L))
    return out


def speedup_instances():
    """20 random workloads between 200 and 500 nodes."""
    sizes = np.linspace(200, 500, 20).round().astype(int)
    return [generate_random_workload(int(n), 3.0 / n, "uniform(1,5)", seed=k, strict_prob=0.1)
            for k, n in enumerate(sizes)]


# -- 1 ---------------------------------------------------------------------------


def _mask_oracle(parent, c):
    a = int(np.argmax(parent))
    return [1 if a - j <= c else 0 for j in range(len(parent))]


@pytest.mark.acceptance(1)
def test_ac1_mask_semantics(record_property):
    t0 = time.perf_counter()
    assert mask_leq(np.array([0, 1, 0]), 0).tolist() == [0, 1, 1]
    cases = 0
    for L in range(1, 6):
        for a in range(L):
            onehot = np.eye(L, dtype=int)[a]
            for c in range(-3, 4):
                assert mask_leq(onehot, c).tolist() == _mask_oracle(onehot, c), (L, a, c)
                cases += 1
    dt = time.perf_counter() - t0
    record_property("detail", f"{cases} cases, {dt * 1000:.1f} ms")
    assert dt < 1.0


# -- 2 ---------------------------------------------------------------------------


@pytest.mark.acceptance(2)
def test_ac2_confidence_example(record_property):
    state = diffsched.init(Dag(1), 3)
    state.logits[:] = np.log([0.5, 0.2, 0.3])
    onehot, conf = constrained_sample(state, 0, np.array([0, 1, 1]), 1.0, np.random.default_rng(0))
    # Masked entries are exact zeros; the unselected 0.2 may carry one rounding step from the softmax.
    assert conf[0] == 0.0 and abs(conf[1] - 0.2) <= np.spacing(0.2)
    c = float(conf.max())
    assert c == 0.3 and int(np.argmax(conf)) == 2 and onehot.tolist() in ([0, 1, 0], [0, 0, 1])
    # The stage the confidence belongs to and the threshold decision, exactly.
    rec = type("R", (), {"confidence": np.array([c]), "schedule": np.array([2]), "iteration": 1})
    assert extract_partial(rec, ThresholdPolicy.fixed(0.3)).assignments == {0: 2}
    record_property("detail", f"C={c!r}")


# -- 3 ---------------------------------------------------------------------------


@pytest.mark.acceptance(3)
def test_ac3_feasible_by_construction(record_property):
    t0 = time.perf_counter()
    passes = violations = 0
    for k, dag in enumerate(sampler_instances()):
        state = diffsched.init(dag, 10, DiffConfig(seed=k))
        sdc = build_sdc(dag, 10)
        for _ in range(10):
            rec = forward_pass(state)
            violations += len(sdc.violations(rec.schedule))
            passes += 1
            diffsched.step(state, rec)
    dt = time.perf_counter() - t0
    record_property("detail", f"{passes} passes, {violations} violations, {dt:.1f} s")
    assert passes == 1000 and violations == 0
    assert dt < 30


# -- 4 ---------------------------------------------------------------------------


@pytest.mark.acceptance(4)
def test_ac4_oracle_equivalence(record_property):
    t0 = time.perf_counter()
    mismatches = infeasible = 0
    for seed in range(50):
        dag, L = small_instance(seed)
        assert dag.node_count <= 8 and L <= 4
        opt, count = brute_force_optimum(dag, L)
        rep = solve_internal(SolverRequest(build_ilp(dag, L, allow_infeasible=True), time_budget=60))
        if count == 0:
            infeasible += 1
            mismatches += rep.status != "infeasible"
            continue
        mismatches += rep.status != "optimal" or exact_objective(rep.schedule, dag, L) != opt
    dt = time.perf_counter() - t0
    record_property("detail", f"50 instances ({infeasible} infeasible), {mismatches} mismatches, {dt:.1f} s")
    assert mismatches == 0
    assert dt < 60


# -- 5 ---------------------------------------------------------------------------


@pytest.mark.acceptance(5)
def test_ac5_gradient_check(record_property):
    worst = 0.0
    eps = 1e-4
    for seed in range(20):
        dag = generate_random_workload(5, 0.5, "uniform(1,5)", seed=seed, strict_prob=0.3)
        state = diffsched.init(dag, 4, DiffConfig(seed=seed, lam=10.0))
        state.logits += np.random.default_rng(seed).normal(size=state.logits.shape)
        rec = forward_pass(state)
        g = gradient(state, rec, through_masks=False)
        fd = np.zeros_like(g)
        for idx in np.ndindex(*g.shape):
            if not state.window[idx]:
                continue
            up, dn = state.logits.copy(), state.logits.copy()
            up[idx] += eps
            dn[idx] -= eps
            fd[idx] = (relaxed_loss(state, up, rec) - relaxed_loss(state, dn, rec)) / (2 * eps)
        scale = np.linalg.norm(fd)
        rel = np.linalg.norm(g - fd) / scale if scale > 0 else np.linalg.norm(g)
        worst = max(worst, rel)
    record_property("detail", f"max relative error {worst:.2e}")
    assert worst <= 1e-3


# -- 6 ---------------------------------------------------------------------------


@pytest.mark.acceptance(6)
def test_ac6_optimality_preserved(record_property):
    worst = 0.0
    for k, (dag, L) in enumerate(desk_instances()):
        model = build_ilp(dag, L)
        recs = diffsched.run(dag, L, DiffConfig(iterations=10, seed=k))
        with warnings.catch_warnings():
            warnings.simplefilter("ignore", EmptyPartialWarning)
            hint = extract_partial(recs[-1], ThresholdPolicy.percentile(70))
        cold = solve_internal(SolverRequest(model, time_budget=60, seed=k))
        warm = solve_internal(SolverRequest(model, warm_start=hint, time_budget=60, seed=k))
        assert cold.status == warm.status == "optimal", (k, cold.status, warm.status)
        worst = max(worst, abs(warm.objective - cold.objective))
    record_property("detail", f"30 instances optimal, max |warm - cold| = {worst:.1e}")
    assert worst <= 1e-6


# -- 7 ---------------------------------------------------------------------------


@pytest.mark.acceptance(7)
@pytest.mark.slow
def test_ac7_hybrid_speedup(record_property):
    t0 = time.perf_counter()
    L, budget = 10, 60.0
    warm_le_cold = warm_le_diff = 0
    rows = []
    instances = speedup_instances()
    for k, dag in enumerate(instances):
        model = build_ilp(dag, L)
        baseline = heuristic_objective(dag, L)
        recs = diffsched.run(dag, L, DiffConfig(iterations=30, seed=k))
        objs = sampled_objectives(recs, dag, L, 1.0)
        picked = select_records(recs, "best", 5, objs)
        with warnings.catch_warnings():
            warnings.simplefilter("ignore", EmptyPartialWarning)
            partials = [extract_partial(r, ThresholdPolicy.percentile(70)) for r in picked]
        diff_final = evaluate_objective(recs[-1].schedule, dag, L).combined
        res = race(model, partials, budget, threads=10, cold_lanes=5, seed=k, baseline=baseline)
        warm, cold = res.best_of("warm"), res.best_of("cold")
        warm_le_cold += warm <= cold
        warm_le_diff += warm <= diff_final
        rows.append((dag.node_count, 100 * diff_final / baseline, 100 * warm / baseline, 100 * cold / baseline))
    dt = time.perf_counter() - t0
    for n, d, w, c in rows:
        print(f"  n={n:3d} diff {d:7.2f}%  warm {w:7.2f}%  cold {c:7.2f}%")
    frac_cold, frac_diff = warm_le_cold / len(instances), warm_le_diff / len(instances)
    record_property("detail", f"warm<=cold {warm_le_cold}/20, warm<=diff {warm_le_diff}/20, {dt / 60:.1f} min")
    assert frac_cold >= 0.7
    assert frac_diff >= 0.9
    assert dt < 45 * 60


# -- 8 ---------------------------------------------------------------------------

ULP_TOL = 4


@pytest.mark.acceptance(8)
def test_ac8_entropy_degenerate_cases():
    for L in range(1, 33):
        for k in (1, 2, 5):
            h = diffsched.stage_entropy([k] * L)
            assert abs(h - math.log(L)) <= ULP_TOL * np.spacing(max(math.log(L), 1.0)), (L, k)
            assert diffsched.stage_entropy([k * L] + [0] * (L - 1)) == 0.0


@pytest.mark.acceptance(8)
@settings(max_examples=200, deadline=None)
@given(counts=st.lists(st.floats(0, 50, allow_nan=False), min_size=1, max_size=12).filter(lambda c: sum(c) > 0))
def test_ac8_entropy_range(counts):
    h = diffsched.stage_entropy(counts)
    assert -1e-12 <= h <= math.log(len(counts)) + 1e-12


@pytest.mark.acceptance(8)
def test_ac8_comm_loss_matches_crossing_cost(record_property):
    worst = 0.0
    for seed in range(100):
        rng = np.random.default_rng(seed)
        n, L = int(rng.integers(2, 40)), int(rng.integers(2, 11))
        dag = generate_random_workload(n, 0.2, "uniform(1,5)", seed=seed)
        if not dag.edges:
            continue
        s = rng.integers(0, L, n)
        got = diffsched.loss_comm(np.eye(L)[s], dag) * dag.total_weight
        worst = max(worst, abs(got - comm_cost(s, dag)))
    record_property("detail", f"max |L_c - crossings| = {worst:.1e}")
    assert worst <= 1e-9


# -- 9 ---------------------------------------------------------------------------


def corpus():
    yield "seven_node", Dag(7, [Edge(0, 4), Edge(1, 4), Edge(2, 4), Edge(3, 6), Edge(4, 5), Edge(4, 6)]), 3
    yield "diamond", Dag(4, [Edge(0, 1), Edge(0, 2), Edge(1, 3), Edge(2, 3)]), 3
    for n in (1, 3, 10):
        yield f"chain{n}", strict_chain(n), n
    for k, dag in enumerate(sampler_instances()):
        yield f"sampler{k}", dag, 10
    for k, (dag, L) in enumerate(desk_instances()):
        yield f"desk{k}", dag, L
    for k in range(50):
        dag, L = small_instance(k)
        try:
            build_sdc(dag, L)
        except InfeasibleError:
            continue
        yield f"small{k}", dag, L
    for k, dag in enumerate(speedup_instances()):
        yield f"rw{k}", dag, 10


@pytest.mark.acceptance(9)
def test_ac9_heuristic_is_exactly_100(record_property):
    count = 0
    for name, dag, L in corpus():
        for alpha in (0.0, 1.0, 2.5):
            s = heuristic_schedule(dag, L)
            pct = evaluate_objective(s, dag, L, alpha, baseline=heuristic_objective(dag, L, alpha)).normalized_pct
            assert pct == 100.0, (name, alpha, pct)
        count += 1
    record_property("detail", f"{count} instances x 3 weightings")


# -- 10 --------------------------------------------------------------------------


def _oracle_rank(values, q):
    v = sorted(values)
    for x in v:
        if 100 * sum(y <= x for y in v) >= q * len(v):
            return x
    return v[-1]


@pytest.mark.acceptance(10)
@settings(max_examples=500, deadline=None)
@given(
    pool=st.lists(st.floats(0.0, 1.0, allow_nan=False), min_size=1, max_size=80),
    q=st.floats(0.5, 99.5, allow_nan=False),
    t=st.lists(st.floats(0.0, 1.0), min_size=2, max_size=2),
)
def test_ac10_threshold_properties(pool, q, t):
    lo, hi = sorted(t)
    rec = type("R", (), {"confidence": np.array(pool), "schedule": np.arange(len(pool)) % 4, "iteration": 1})
    with warnings.catch_warnings():
        warnings.simplefilter("ignore", EmptyPartialWarning)
        a = extract_partial(rec, ThresholdPolicy.fixed(lo)).assignments
        b = extract_partial(rec, ThresholdPolicy.fixed(hi)).assignments
    assert b.items() <= a.items()
    assert nearest_rank(pool, q) == _oracle_rank(pool, q)
    assert auto_threshold([rec], q) == _oracle_rank(pool, q)


# -- 11 --------------------------------------------------------------------------


@pytest.mark.acceptance(11)
def test_ac11_mps_roundtrip(record_property):
    for seed in range(20):
        rng = np.random.default_rng(seed)
        n, L = int(rng.integers(1, 30)), int(rng.integers(2, 8))
        dag = generate_random_workload(n, 0.2, "uniform(1,5)", seed=seed, strict_prob=0.2)
        model = build_ilp(dag, L, alpha=float(rng.choice([0.5, 1.0, 2.0])), allow_infeasible=True)
        back = parse_mps(emit_mps(model))
        assert same_model(model, back), seed
        assert (back.A != model.A).nnz == 0
    record_property("detail", "20 models")


@pytest.mark.acceptance(11)
@pytest.mark.parametrize(
    "name, dag, L, hint",
    [
        ("start_node2_stage1_L3.mst", Dag(3), 3, {2: 1}),
        ("start_node3_stage3_L4.mst", Dag(4), 4, {3: 3}),
        ("start_seven_node_L3.mst",
         Dag(7, [Edge(0, 4), Edge(1, 4), Edge(2, 4), Edge(3, 6), Edge(4, 5), Edge(4, 6)]), 3,
         {0: 0, 4: 1, 6: 2}),
        ("start_empty.mst", Dag(2), 2, {}),
    ],
)
def test_ac11_mip_start_goldens(name, dag, L, hint):
    assert emit_mip_start(hint, build_ilp(dag, L)).encode() == (GOLDEN / name).read_bytes()
