"""Feature extraction, time prediction, scheduling, and tree cutting.

The partition quality tests compare the greedy result against exhaustive
enumeration of every cut set within the bounds, using the same objective.
"""

import itertools
import random
from types import SimpleNamespace

import numpy as np
import pytest

from rtlopt.errors import InfeasibleBounds
from rtlopt.frontend import ast as A
from rtlopt.frontend import parse
from rtlopt.partition import (CostPredictor, FeatureVector, evaluate_cut,
                              extract_features, fit_predictor, partition,
                              schedule_first_fit)


def mod(src):
    return parse(src).modules[0]


# --------------------------------------------------------------------------
# features

def test_features_count_single_add():
    v = extract_features(mod("""
    module m(input [7:0] a, input [7:0] b, output [8:0] y);
      assign y = a + b;
    endmodule"""))
    assert v.counts == {"+:16": 1}


def test_features_empty_module_all_zero():
    v = extract_features(mod("module m(input a, output b);\n"
                             "assign b = a;\nendmodule"))
    assert v.counts == {}
    assert v.total() == 0


def test_features_sum_equals_operator_nodes():
    m = mod("""
    module m(input [7:0] a, input [7:0] b, input s, output [7:0] y,
             output z);
      wire [7:0] t;
      assign t = s ? (a + b) : (a - b);
      assign y = t << 1;
      assign z = a[0] & ~s;
    endmodule""")
    v = extract_features(m)
    oracle = sum(1 for e in A.module_exprs(m)
                 if isinstance(e, (A.Binary, A.Unary, A.Index, A.Ternary)))
    assert v.total() == oracle == 7


def test_features_multiply_by_power_of_two():
    v = extract_features(mod("""
    module m(input [7:0] x, output [15:0] y);
      assign y = x * 8'd4;
    endmodule"""))
    mults = {k: n for k, n in v.counts.items() if k.startswith("*")}
    assert sum(mults.values()) == 1


def test_feature_width_buckets():
    m = mod("""
    module m(input [3:0] a, input [16:0] b, input [64:0] c,
             output [3:0] x, output [16:0] y, output [64:0] z);
      assign x = a + 4'd1;
      assign y = b + 17'd1;
      assign z = c + 65'd1;
    endmodule""")
    v = extract_features(m)
    assert v.counts == {"+:4": 1, "+:64": 1, "+:128": 1}


# --------------------------------------------------------------------------
# predictor

def test_fit_exact_linear_data():
    v = FeatureVector({"+:16": 1})
    v2 = FeatureVector({"+:16": 2})
    p = fit_predictor([(v, 2.0), (v2, 4.0)])
    assert abs(p.predict(v) - 2.0) <= 1e-6
    assert abs(p.predict(v2) - 4.0) <= 1e-6


def test_fit_single_sample_is_constant():
    p = fit_predictor([(FeatureVector({"+:4": 3}), 7.5)])
    assert p.predict(FeatureVector()) == 7.5
    assert p.predict(FeatureVector({"*:64": 9})) == 7.5


def test_fit_all_zero_features_is_mean():
    p = fit_predictor([(FeatureVector(), 1.0), (FeatureVector(), 3.0)])
    assert p.predict(FeatureVector()) == pytest.approx(2.0)


def test_fit_recovers_known_weights():
    rng = random.Random(7)
    keys = ["+:16", "*:16", "mux:4", "select:4"]
    truth = {"+:16": 0.5, "*:16": 3.0, "mux:4": 0.25, "select:4": 0.1}
    intercept = 1.5
    samples = []
    for _ in range(10):
        v = FeatureVector({k: rng.randrange(0, 6) for k in keys})
        t = intercept + sum(truth[k] * n for k, n in v.counts.items())
        samples.append((v, t))
    p = fit_predictor(samples)
    for k in keys:
        assert abs(p.weights[k] - truth[k]) < 1e-4
    assert abs(p.intercept - intercept) < 1e-4


def test_predict_clamped_nonnegative():
    p = CostPredictor({"+:4": -5.0}, 1.0)
    assert p.predict(FeatureVector({"+:4": 10})) == 0.0


def test_predictor_json_roundtrip():
    p = CostPredictor({"+:16": 0.5}, 0.25)
    q = CostPredictor.from_json(p.to_json())
    assert q.weights == p.weights and q.intercept == p.intercept


# --------------------------------------------------------------------------
# scheduling

def test_schedule_three_equal_jobs_three_workers():
    assert schedule_first_fit([3, 3, 3], 3) == 3


def test_schedule_pinned_ffd_example():
    assert schedule_first_fit([5, 4, 3, 3], 2) == 8


def test_schedule_empty():
    assert schedule_first_fit([], 4) == 0


def test_schedule_lower_bounds():
    rng = random.Random(3)
    for _ in range(50):
        times = [rng.uniform(0, 10) for _ in range(rng.randrange(1, 9))]
        workers = rng.randrange(1, 5)
        got = schedule_first_fit(times, workers)
        assert got >= max(times) - 1e-12
        assert got >= sum(times) / workers - 1e-12


def test_schedule_matches_brute_force_small():
    rng = random.Random(11)
    for _ in range(30):
        times = [rng.randrange(1, 10) for _ in range(rng.randrange(1, 7))]
        workers = rng.randrange(1, 4)
        best = min(
            max(sum(t for t, w in zip(times, assign) if w == k)
                for k in range(workers))
            for assign in itertools.product(range(workers), repeat=len(times))
        )
        got = schedule_first_fit(times, workers)
        # FFD is within 4/3 OPT + 1/3 (classic multiprocessor bound)
        assert got <= best * 4 / 3 + max(times) / 3 + 1e-9
        assert got >= best - 1e-9


# --------------------------------------------------------------------------
# partitioning

def tree_of(nodes, edges, root=0):
    return SimpleNamespace(nodes=nodes, edges=edges, root=root)


def star_tree():
    return tree_of(
        [(0, "top", "top", 0.0), (1, "a", "top.a", 2.0),
         (2, "b", "top.b", 2.0), (3, "c", "top.c", 2.0)],
        [(0, 1, "combinational", 1.0), (0, 2, "combinational", 1.0),
         (0, 3, "combinational", 1.0)])


def test_partition_star_lambda_zero():
    plan = partition(star_tree(), 0.0, 1, 3, 3)
    assert sorted(plan.cut_set) == [(0, 1), (0, 2), (0, 3)]
    assert plan.L == 2.0
    assert plan.C == 2.0
    assert len(plan.groups) == len(plan.cut_set) + 1


def test_partition_star_lambda_large_prefers_min_cuts():
    plan = partition(star_tree(), 10.0, 1, 3, 3)
    assert len(plan.cut_set) == 1
    brute = min(
        evaluate_cut(star_tree(), set(s), 10.0, 3).C
        for r in range(1, 4)
        for s in itertools.combinations([(0, 1), (0, 2), (0, 3)], r))
    assert plan.C == pytest.approx(brute)


def test_partition_infeasible_bounds():
    with pytest.raises(InfeasibleBounds):
        partition(star_tree(), 0.0, 4, 5, 2)
    with pytest.raises(InfeasibleBounds):
        partition(star_tree(), 0.0, 3, 2, 2)


def test_partition_lambda_zero_single_worker_total_weight():
    rng = random.Random(5)
    for _ in range(20):
        t = random_tree(rng, rng.randrange(2, 10))
        total = sum(w for _, _, _, w in t.nodes)
        plan = partition(t, 0.0, 0, len(t.edges), 1)
        assert plan.C == pytest.approx(total)


def test_partition_plan_invariants():
    plan = partition(star_tree(), 0.5, 1, 3, 2)
    assert 1 <= len(plan.cut_set) <= 3
    assert plan.C == pytest.approx(plan.L + 0.5 * plan.E)
    all_ids = sorted(n for g in plan.groups for n in g)
    assert all_ids == [0, 1, 2, 3]


def test_partition_json_shape():
    import json
    plan = partition(star_tree(), 0.0, 1, 3, 3)
    data = json.loads(plan.to_json())
    assert set(data) == {"cuts", "groups", "L", "E", "C", "lambda"}
    assert data["lambda"] == 0.0


def random_tree(rng, n):
    kinds = ["direct", "combinational", "sequential"]
    kw = {"direct": 0.1, "combinational": 1.0, "sequential": 0.3}
    nodes = [(i, f"m{i}", f"p{i}", round(rng.uniform(0.0, 5.0), 2))
             for i in range(n)]
    edges = []
    for i in range(1, n):
        parent = rng.randrange(0, i)
        kind = rng.choice(kinds)
        edges.append((parent, i, kind, kw[kind]))
    return tree_of(nodes, sorted(edges))


def brute_best(tree, lam, n_min, n_max, workers):
    edges = [(p, c) for p, c, _, _ in tree.edges]
    best = None
    for r in range(n_min, min(n_max, len(edges)) + 1):
        for combo in itertools.combinations(edges, r):
            plan = evaluate_cut(tree, set(combo), lam, workers)
            if best is None or plan.C < best.C:
                best = plan
    return best


def test_partition_greedy_within_factor_on_random_trees():
    rng = random.Random(42)
    worst = 1.0
    for _ in range(60):
        n = rng.randrange(4, 13)
        t = random_tree(rng, n)
        lam = rng.choice([0.0, 0.2, 1.0])
        workers = rng.randrange(1, 5)
        n_max = min(3, len(t.edges))
        got = partition(t, lam, 1, n_max, workers)
        opt = brute_best(t, lam, 1, n_max, workers)
        assert opt.C > 0
        ratio = got.C / opt.C
        worst = max(worst, ratio)
        assert ratio <= 1.5 + 1e-9
    assert worst >= 1.0


def test_partition_deterministic():
    t = random_tree(random.Random(9), 10)
    a = partition(t, 0.3, 1, 3, 2)
    b = partition(t, 0.3, 1, 3, 2)
    assert a.to_json() == b.to_json()


def test_partition_path_tree_example():
    rng = random.Random(17)
    nodes = [(i, f"m{i}", f"p{i}", rng.uniform(0.5, 4.0)) for i in range(12)]
    edges = [(i, i + 1, "combinational", 1.0) for i in range(11)]
    t = tree_of(nodes, edges)
    got = partition(t, 0.5, 1, 3, 3)
    opt = brute_best(t, 0.5, 1, 3, 3)
    assert got.C <= opt.C * 1.5 + 1e-9


def test_partition_forced_cuts_reach_n_min():
    # heavy penalty on cutting, but n_min forces two cuts anyway
    t = star_tree()
    plan = partition(t, 100.0, 2, 3, 3)
    assert len(plan.cut_set) == 2


def test_evaluate_cut_edge_weight_sum():
    t = star_tree()
    plan = evaluate_cut(t, {(0, 1), (0, 2)}, 1.0, 2)
    assert plan.E == 2.0
    assert plan.C == plan.L + plan.E


def test_partition_on_built_instance_tree():
    from rtlopt.analysis import build_instance_tree
    src = """
    module leaf(input [7:0] p, output [8:0] q); assign q = p + 1; endmodule
    module top(input [7:0] x, output [8:0] a, output [8:0] b);
      leaf u1(.p(x), .q(a));
      leaf u2(.p(x), .q(b));
    endmodule
    """
    tree = build_instance_tree(parse(src), "top")
    plan = partition(tree, 0.0, 0, 2, 2)
    assert plan.C <= sum(w for _, _, _, w in tree.nodes)
