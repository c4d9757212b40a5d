import math

import numpy as np
import pytest

from coopsub.core import CooperativeCost, DegenerateInstanceError, FacilityLocation, Power, WeightedCoverage
from coopsub.experiments import random_oracle
from coopsub.greedy import (BruteForceRefused, PieceInfeasible, brute_force, greedy_knapsack, greedy_ratio,
                            greedy_set_cover)
from coopsub.linear_solvers import CardinalityLB, InfeasibleError, solve_linear

from conftest import all_subsets

E = math.e / (math.e - 1)


def modular(w):
    return CooperativeCost([(Power(1.0), w)])


def exhaustive(n, score, feasible):
    """Independent reference: loop over all subsets, keep the lexicographically first best."""
    best = None
    for X in sorted(all_subsets(n)):
        if feasible(X):
            v = score(X)
            if best is None or v < best[1]:
                best = (X, v)
    return best


# ---- set cover --------------------------------------------------------------

def test_cover_modular_takes_everything_useful():
    B = np.eye(5, dtype=bool)
    w = np.array([1.0, 0.0, 2.0, 3.0, 0.0])
    g = WeightedCoverage(B, w)
    r = greedy_set_cover(g, np.ones(5), g(range(5)))
    assert r.chosen == (0, 2, 3)
    assert r.trace.stop_reason == "cover reached"


def test_cover_prefers_big_element_on_ratio():
    # element 0 covers the big concept and every tiny one; the rest cover one tiny concept each
    B = np.zeros((6, 6), dtype=bool)
    B[0, :] = True
    for i in range(1, 6):
        B[i, i] = True
    weights = np.array([5.0] + [0.001] * 5)
    g = WeightedCoverage(B, weights)
    cost = np.array([1.0] + [0.1] * 5)
    r = greedy_set_cover(g, cost, g(range(6)))
    assert r.trace.elements[0] == 0 and r.chosen == (0,)


def test_cover_infeasible_target():
    g = FacilityLocation(np.ones((2, 3)))
    with pytest.raises(InfeasibleError):
        greedy_set_cover(g, np.ones(3), 10.0)


def test_cover_zero_cost_first():
    g = WeightedCoverage(np.eye(3, dtype=bool), [1.0, 1.0, 1.0])
    r = greedy_set_cover(g, [1.0, 0.0, 1.0], 3.0)
    assert r.trace.elements[0] == 1


def test_cover_offset_in_cost():
    g = WeightedCoverage(np.eye(3, dtype=bool), [1.0, 1.0, 1.0])
    r = greedy_set_cover(g, [1.0, 2.0, 3.0], 1.0, cost_offset=0.5)
    assert r.chosen == (0,) and r.cost == pytest.approx(1.5)


def test_cover_against_brute_force_random():
    for s in range(40):
        r = np.random.default_rng(s)
        n = 10
        g = random_oracle(r, n, "coverage" if s % 2 else "facility")
        cost = r.uniform(0.1, 1.0, n)
        c = float(r.uniform(0.3, 1.0)) * g(range(n))
        res = greedy_set_cover(g, cost, c)
        assert g(res.chosen) >= c * (1 - 1e-9)
        opt = exhaustive(n, lambda X: float(cost[list(X)].sum()), lambda X: g(X) >= c * (1 - 1e-9))
        assert res.cost <= (1 + math.log(res.extra["wolsey_ratio"])) * opt[1] * (1 + 1e-9)


# ---- knapsack ---------------------------------------------------------------

def test_knapsack_nonbinding_budget_takes_everything():
    g = WeightedCoverage(np.eye(4, dtype=bool), [1.0, 2.0, 3.0, 4.0])
    r = greedy_knapsack(g, [1, 1, 1, 1], 10.0)
    assert r.chosen == (0, 1, 2, 3)


def test_knapsack_zero_room_only_free_elements():
    g = WeightedCoverage(np.eye(4, dtype=bool), [1.0, 2.0, 0.0, 4.0])
    r = greedy_knapsack(g, [0, 1, 0, 0], 2.0, cost_offset=2.0)
    assert r.chosen == (0, 3)


def test_knapsack_offset_above_budget_is_piece_infeasible():
    g = FacilityLocation(np.ones((2, 3)))
    with pytest.raises(PieceInfeasible):
        greedy_knapsack(g, np.ones(3), 1.0, cost_offset=1.5)


def test_knapsack_budget_exact_and_factor():
    for s in range(40):
        r = np.random.default_rng(1000 + s)
        n = 10
        g = FacilityLocation(r.random((6, n)))
        cost = r.uniform(0.1, 1.0, n)
        b = 0.5 * float(cost.sum())
        res = greedy_knapsack(g, cost, b)
        assert math.fsum(cost[list(res.chosen)]) <= b
        opt = exhaustive(n, lambda X: -g(X), lambda X: math.fsum(cost[list(X)]) <= b)
        assert res.value >= 0.5 * (1 - 1 / math.e) * -opt[1] * (1 - 1e-9)
        full = greedy_knapsack(g, cost, b, partial_enumeration=3)
        assert full.value >= res.value - 1e-12
        assert full.value >= (1 - 1 / math.e) * -opt[1] * (1 - 1e-9)


def test_knapsack_trace_stop_reason():
    g = WeightedCoverage(np.eye(3, dtype=bool), [1.0, 1.0, 1.0])
    r = greedy_knapsack(g, [1, 1, 1], 2.0)
    assert r.trace.stop_reason == "budget exhausted"


# ---- ratio ------------------------------------------------------------------

def test_ratio_best_singleton_modular():
    g = WeightedCoverage(np.eye(4, dtype=bool), [1.0, 1.0, 1.0, 1.0])
    r = greedy_ratio([2.0, 0.5, 3.0, 1.0], 0.0, g)
    assert r.chosen == (1,) and r.value == pytest.approx(0.5)


def test_ratio_offset_amortised_and_prefix_minimum():
    g = WeightedCoverage(np.eye(4, dtype=bool), [1.0, 1.0, 1.0, 1.0])
    r = greedy_ratio([2.0, 0.5, 3.0, 1.0], 10.0, g)
    prefixes = r.extra["prefix_ratios"]
    assert r.value == pytest.approx(min(prefixes))
    assert len(r.chosen) > 1
    # recompute every prefix from the greedy order
    order = r.extra["order"]
    cost = np.array([2.0, 0.5, 3.0, 1.0])
    manual = [(cost[order[:t]].sum() + 10) / g(order[:t]) for t in range(1, len(order) + 1)]
    assert np.allclose(manual, prefixes)


def test_ratio_rejects_zero_g():
    g = WeightedCoverage(np.zeros((3, 1), dtype=bool), [1.0])
    with pytest.raises(DegenerateInstanceError):
        greedy_ratio([1, 1, 1], 0.0, g)


def test_ratio_against_brute_force():
    for s in range(40):
        r = np.random.default_rng(2000 + s)
        n = 10
        g = random_oracle(r, n)
        cost = r.uniform(0.1, 1.0, n)
        off = float(r.uniform(0, 2))
        res = greedy_ratio(cost, off, g)
        opt = exhaustive(n, lambda X: (cost[list(X)].sum() + off) / g(X), lambda X: len(X) > 0 and g(X) > 0)
        assert res.value <= E * opt[1] * (1 + 1e-9)


# ---- lazy versus eager ----------------------------------------------------------

@pytest.mark.parametrize("seed", range(12))
def test_lazy_matches_eager(seed):
    r = np.random.default_rng(seed)
    n = 30
    g = random_oracle(r, n, "coverage" if seed % 2 else "facility")
    cost = np.round(r.uniform(0.0, 1.0, n), 1)   # coarse values force ties and zero costs
    c = 0.8 * g(range(n))
    for lazy_run, eager_run in (
        (greedy_set_cover(g, cost, c, lazy=True), greedy_set_cover(g, cost, c, lazy=False)),
        (greedy_knapsack(g, cost, 0.3 * cost.sum(), lazy=True), greedy_knapsack(g, cost, 0.3 * cost.sum(), lazy=False)),
        (greedy_ratio(cost, 0.5, g, lazy=True), greedy_ratio(cost, 0.5, g, lazy=False)),
    ):
        assert lazy_run.chosen == eager_run.chosen
        assert lazy_run.trace.elements == eager_run.trace.elements


# ---- brute force ------------------------------------------------------------

def test_brute_force_problem1_matches_linear_solver():
    for s in range(10):
        r = np.random.default_rng(s)
        w = r.random(8)
        c = CardinalityLB(int(r.integers(1, 8)), 8)
        bf = brute_force(1, modular(w), constraint=c)
        lin = solve_linear(c, w)
        assert bf.value == pytest.approx(lin.objective) and bf.chosen == lin.chosen


def test_brute_force_ratio_identical_functions():
    f = CooperativeCost([(Power(0.5), [1.0, 2.0, 3.0])])
    from coopsub.core import CooperativeCostOracle
    bf = brute_force(4, f, CooperativeCostOracle(f))
    assert bf.chosen == (0,) and bf.value == pytest.approx(1.0)


def test_brute_force_full_cover():
    r = np.random.default_rng(7)
    g = random_oracle(r, 8)
    w = r.random(8)
    bf = brute_force(2, modular(w), g, target=g(range(8)))
    assert g(bf.chosen) >= g(range(8)) * (1 - 1e-9)
    ref = exhaustive(8, lambda X: w[list(X)].sum(), lambda X: g(X) >= g(range(8)) * (1 - 1e-9))
    assert bf.value == pytest.approx(ref[1])


def test_brute_force_cap():
    with pytest.raises(BruteForceRefused):
        brute_force(3, modular(np.ones(21)), FacilityLocation(np.ones((2, 21))), budget=1.0)
    with pytest.warns(UserWarning):
        brute_force(1, modular(np.ones(17)), constraint=CardinalityLB(16, 17))
