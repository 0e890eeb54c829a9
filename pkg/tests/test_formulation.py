import math
from pathlib import Path

import numpy as np
import pytest
from hypothesis import given, settings
from hypothesis import strategies as st

from conftest import strict_chain
from hybridsched.errors import InfeasibleError, ModelError
from hybridsched.formulation import (
    build_ilp,
    build_sdc,
    comm_cost,
    complete_schedule,
    emit_lp,
    emit_mip_start,
    emit_mps,
    evaluate_objective,
    feasible,
    heuristic_objective,
    heuristic_schedule,
    parse_mps,
    parse_solution,
    same_model,
)
from hybridsched.graph import Dag, Edge, generate_random_workload
from oracles import all_schedules, exact_objective, feasible_mask

GOLDEN = Path(__file__).parent / "golden"


def test_sdc_contains_edge_constraint(seven_node_dfg):
    sdc = build_sdc(seven_node_dfg, 3)
    assert (0, 4, 0) in sdc.constraints
    assert len(sdc.constraints) == seven_node_dfg.edge_count
    assert sdc.bounds == (0, 2)


def test_sdc_edgeless():
    assert build_sdc(Dag(3), 4).constraints == ()


def test_strict_chain_only_one_feasible_schedule():
    dag = strict_chain(3)
    sdc = build_sdc(dag, 3)
    assert sdc.constraints == ((0, 1, -1), (1, 2, -1))
    ok = [tuple(s) for s in all_schedules(3, 3) if feasible(s, sdc)]
    assert ok == [(0, 1, 2)]


def test_sdc_infeasible_latency():
    with pytest.raises(InfeasibleError):
        build_sdc(strict_chain(4), 3)


def test_feasible_examples(seven_node_dfg):
    sdc = build_sdc(seven_node_dfg, 3)
    assert feasible([0, 0, 0, 0, 1, 2, 2], sdc)
    assert feasible(np.zeros(7, dtype=int), sdc)
    assert not feasible([0, 0, 0, 0, 1, 0, 2], sdc)
    assert not feasible([0, 0, 1], build_sdc(strict_chain(3), 3))
    assert not feasible([0, 0, 0, 0, 1, 2, 3], sdc)
    with pytest.raises(ValueError):
        feasible([0, 0], sdc)


def test_objective_examples(seven_node_dfg):
    ev = evaluate_objective(np.zeros(7, dtype=int), seven_node_dfg, 3)
    assert (ev.peak, ev.comm) == (7, 0.0)
    ev = evaluate_objective([0, 1, 2], strict_chain(3), 3)
    assert (ev.peak, ev.comm) == (1, 2.0)
    ev = evaluate_objective([0, 0, 0, 0, 1, 2, 2], seven_node_dfg, 3)
    assert ev.peak == 4


def test_objective_rejects_infeasible():
    with pytest.raises(InfeasibleError):
        evaluate_objective([0, 0, 0], strict_chain(3), 3)


def test_combined_objective_formula(seven_node_dfg):
    s = [0, 0, 1, 0, 1, 2, 2]
    ev = evaluate_objective(s, seven_node_dfg, 3, alpha=0.5)
    # peak 3 over ceil(7/3)=3; crossings: 0->4, 1->4, 4->5, 4->6 one each, 3->6 two
    assert ev.peak == 3 and ev.comm == 6.0
    assert ev.combined == pytest.approx(0.5 * 3 / 3 + 6 / 6, abs=1e-15)


def test_heuristic_examples():
    s = heuristic_schedule(Dag(10), 10)
    assert sorted(s.tolist()) == list(range(10))
    assert heuristic_schedule(Dag(1), 4).tolist() == [0]
    assert heuristic_schedule(strict_chain(3), 3).tolist() == [0, 1, 2]


def test_heuristic_is_100_percent(seven_node_dfg):
    s = heuristic_schedule(seven_node_dfg, 3)
    assert evaluate_objective(s, seven_node_dfg, 3).normalized_pct == 100.0


def test_completion_respects_consistent_hint(seven_node_dfg):
    s = complete_schedule(seven_node_dfg, 3, hint={4: 1, 6: 2})
    assert s[4] == 1 and s[6] == 2
    assert feasible(s, build_sdc(seven_node_dfg, 3))


def test_completion_drops_conflicting_hint():
    # 0 -> 1 with c=-1: hints 0@1 and 1@0 cannot both hold; the lower priority goes.
    dag = Dag(2, [Edge(0, 1, 1.0, -1)])
    s = complete_schedule(dag, 3, hint={0: 1, 1: 0}, priority={0: 0.9, 1: 0.1})
    assert s[0] == 1 and s[1] == 2


def test_one_node_model_shape():
    m = build_ilp(Dag(1), 2)
    assert m.var_names == ["x_0_0", "x_0_1", "M"]
    assert m.integer.tolist() == [True, True, False]
    assert m.row_names == ["assign_0", "peak_0", "peak_1"]
    x = m.encode([0])
    assert m.row_violations(x) == [] and m.objective_value(x) == 1.0


def test_model_sizes(seven_node_dfg):
    L = 3
    m = build_ilp(seven_node_dfg, L)
    n, E = 7, seven_node_dfg.edge_count
    assert m.num_vars == n * L + E * (L - 1) + 1
    assert m.num_rows == n + E + L + E * (L - 1)


def test_out_of_window_variables_fixed():
    m = build_ilp(strict_chain(3), 4)
    fixed = {nm for k, nm in enumerate(m.var_names) if m.ub[k] == 0}
    assert fixed == {"x_0_2", "x_0_3", "x_1_0", "x_1_3", "x_2_0", "x_2_1"}


def test_infeasible_model_build():
    with pytest.raises(InfeasibleError):
        build_ilp(strict_chain(4), 3)
    m = build_ilp(strict_chain(4), 3, allow_infeasible=True)
    assert not m.problem.feasible


def test_negative_alpha_rejected():
    with pytest.raises(ValueError):
        build_ilp(Dag(2), 2, alpha=-1)


def test_encode_decode_roundtrip(seven_node_dfg):
    m = build_ilp(seven_node_dfg, 3)
    s = np.array([0, 0, 1, 0, 1, 2, 2])
    assert m.decode(m.encode(s)).tolist() == s.tolist()
    with pytest.raises(ModelError):
        m.decode({})


small_dags = st.builds(
    generate_random_workload,
    n=st.integers(1, 6),
    p=st.floats(0.0, 0.8),
    weight_dist=st.sampled_from(["constant(1)", "uniform(0.5,2.0)"]),
    seed=st.integers(0, 10**6),
    strict_prob=st.floats(0.0, 0.5),
)


@settings(max_examples=40, deadline=None)
@given(dag=small_dags, L=st.integers(2, 4), alpha=st.sampled_from([0.0, 0.5, 1.0, 3.0]))
def test_every_feasible_schedule_satisfies_model_rows(dag, L, alpha):
    try:
        m = build_ilp(dag, L, alpha)
    except InfeasibleError:
        return
    S = all_schedules(dag.node_count, L)
    for s in S[feasible_mask(S, dag)][:50]:
        x = m.encode(s)
        assert m.row_violations(x) == []
        ev = evaluate_objective(s, dag, L, alpha, baseline=1.0)
        assert abs(m.objective_value(x) - ev.combined) <= 1e-9
        assert float(exact_objective(s, dag, L, alpha)) == pytest.approx(ev.combined, abs=1e-12)


@settings(max_examples=40, deadline=None)
@given(dag=small_dags, L=st.integers(2, 4))
def test_infeasible_schedules_violate_some_row(dag, L):
    try:
        m = build_ilp(dag, L)
    except InfeasibleError:
        return
    S = all_schedules(dag.node_count, L)
    for s in S[~feasible_mask(S, dag)][:30]:
        assert m.row_violations(m.encode(s)) != []


@settings(max_examples=60, deadline=None)
@given(dag=small_dags, L=st.integers(1, 6))
def test_heuristic_always_feasible(dag, L):
    try:
        s = heuristic_schedule(dag, L)
    except InfeasibleError:
        return
    assert feasible(s, build_sdc(dag, L))
    assert evaluate_objective(s, dag, L).normalized_pct == 100.0


def test_peak_never_below_average(seven_node_dfg):
    for s in all_schedules(7, 3)[feasible_mask(all_schedules(7, 3), seven_node_dfg)]:
        assert evaluate_objective(s, seven_node_dfg, 3, baseline=1.0).peak >= math.ceil(7 / 3)


def test_comm_cost_counts_spanned_boundaries():
    dag = Dag(2, [Edge(0, 1, 2.5)])
    assert comm_cost([0, 3], dag) == 7.5
    assert comm_cost([2, 2], dag) == 0.0


def test_zero_weight_graph_has_no_comm_term():
    dag = Dag(3, [Edge(0, 1, 0.0), Edge(1, 2, 0.0)])
    ev = evaluate_objective([0, 1, 2], dag, 3, baseline=1.0)
    assert ev.combined == 1.0
    assert heuristic_objective(dag, 3) == 1.0


# -- interchange -------------------------------------------------------------


def test_one_node_lp_golden():
    assert emit_lp(build_ilp(Dag(1), 2)) == (GOLDEN / "one_node_L2.lp").read_text()


def test_one_node_mps_golden():
    assert emit_mps(build_ilp(Dag(1), 2)) == (GOLDEN / "one_node_L2.mps").read_text()


def test_lp_has_all_sections(seven_node_dfg):
    text = emit_lp(build_ilp(seven_node_dfg, 3))
    for head in ("Minimize", "Subject To", "Bounds", "Binaries", "End"):
        assert f"\n{head}\n" in text
    assert " prec_0: x_0_1 + 2 x_0_2 - x_4_1 - 2 x_4_2 <= 0\n" in text
    assert max(len(line) for line in text.splitlines()) <= 210


def test_mps_roundtrip(seven_node_dfg):
    m = build_ilp(seven_node_dfg, 3)
    back = parse_mps(emit_mps(m))
    assert same_model(m, back)


def test_mps_reader_free_form_and_bounds():
    text = """NAME demo
ROWS
 N cost
 G r1
COLUMNS
 a cost 1 r1 1
 b cost 2 r1 1
RHS
 rhs r1 3
BOUNDS
 LO bnd a -1
 MI bnd b
 UP bnd b 4
ENDATA
"""
    m = parse_mps(text)
    assert m.var_names == ["a", "b"] and m.senses == ["G"]
    assert m.lb.tolist() == [-1.0, -np.inf] and m.ub.tolist() == [np.inf, 4.0]
    assert m.rhs.tolist() == [3.0]


def test_mps_reader_errors():
    with pytest.raises(ModelError):
        parse_mps("NAME x\nROWS\n N obj\nCOLUMNS\n a r9 1\nENDATA\n")
    with pytest.raises(ModelError):
        parse_mps("NAME x\nRANGES\nENDATA\n")


def test_mip_start_one_hot():
    dag = Dag(3)
    m = build_ilp(dag, 3)
    assert emit_mip_start({2: 1}, m) == (GOLDEN / "start_node2_stage1_L3.mst").read_text()


def test_mip_start_rejects_out_of_window():
    m = build_ilp(strict_chain(3), 3)
    with pytest.raises(ModelError, match="window"):
        emit_mip_start({1: 0}, m)
    with pytest.raises(ModelError):
        emit_mip_start({7: 0}, m)


def test_parse_solution_formats(seven_node_dfg):
    m = build_ilp(seven_node_dfg, 3)
    text = "# Objective value = 1.5\nstatus: optimal\n1 x_0_0 1 0.0\nx_0_1 = 0\nM 3\n"
    values, status = parse_solution(text, m)
    assert status == "optimal"
    assert values == {"x_0_0": 1.0, "x_0_1": 0.0, "M": 3.0}
    with pytest.raises(ModelError):
        parse_solution("x_0_0 one\n", m)
