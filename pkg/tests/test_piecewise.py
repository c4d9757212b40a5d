import math

import numpy as np
import pytest
from hypothesis import given, settings
from hypothesis import strategies as st

from coopsub.core import CooperativeCost, ExplicitPL, Log1p, Power, Truncation
from coopsub.linear_solvers import BipartiteMatching, CardinalityLB
from coopsub.piecewise import (DegenerateComponentError, PLCost, build_envelope, build_pl_cost, component_range,
                               eval_envelope, grid_ratio, piece_count, verify_sandwich)

from conftest import all_subsets


def test_range_fallback():
    f = CooperativeCost([(Power(0.5), [0.5, 2, 3])])
    assert component_range(f, 0) == (0.5, 5.5)


def test_range_cardinality_matches_enumeration():
    f = CooperativeCost([(Power(0.5), [1, 2, 3])])
    loads = [sum([1, 2, 3][j] for j in X) for X in all_subsets(3) if len(X) >= 2]
    assert component_range(f, 0, CardinalityLB(2, 3)) == (min(loads), max(loads)) == (3, 6)


def test_range_two_by_two_matching():
    f = CooperativeCost([(Power(0.5), [1, 5, 2, 4])])
    c = BipartiteMatching(2, 2, [(0, 0), (0, 1), (1, 0), (1, 1)])
    assert component_range(f, 0, c) == (5, 7)


def test_range_rejects_zero_component():
    f = CooperativeCost([(Power(0.5), [0, 0, 0])])
    with pytest.raises(DegenerateComponentError):
        component_range(f, 0)


def test_identity_envelope_is_exact():
    env = build_envelope(Power(1.0), 0.3, 17.0, 0.2)
    assert np.allclose(env.slopes, 1.0) and np.allclose(env.intercepts, 0.0, atol=1e-12)
    ys = np.linspace(0, 40, 101)
    assert np.allclose(eval_envelope(env, ys), ys)


def test_truncation_with_cap_on_grid_is_exact():
    # l=1, eps=1 gives breakpoints 1, 2, 4, 8: cap 4 sits on the grid
    env = build_envelope(Truncation(4.0), 1.0, 8.0, 1.0)
    assert 4.0 in env.breakpoints.tolist()
    ys = np.linspace(0, 8, 161)
    assert np.allclose(eval_envelope(env, ys), np.minimum(ys, 4.0), atol=1e-12)


def test_sqrt_hand_computed_segment():
    env = build_envelope(Power(0.5), 1.0, 16.0, 1.0)
    assert env.epsilon_prime == pytest.approx(3.0)
    assert env.breakpoints.tolist() == pytest.approx([1, 4, 16])
    assert env.slopes[1] == pytest.approx(1 / 3)
    assert env.intercepts[1] == pytest.approx(2 / 3)
    assert eval_envelope(env, 2.0) == pytest.approx(4 / 3)
    assert eval_envelope(env, 2.0) < math.sqrt(2) * 2


def test_envelope_edge_values():
    env = build_envelope(Log1p(2.0), 0.4, 9.0, 0.1)
    assert eval_envelope(env, 0.0) == 0.0
    for b in env.breakpoints:
        assert eval_envelope(env, b) == pytest.approx(float(Log1p(2.0)(b)), rel=1e-12)


def test_degenerate_range_and_bad_epsilon():
    env = build_envelope(Power(0.5), 2.0, 2.0, 0.1)
    assert env.n_pieces == 1 and env.lead_slope == pytest.approx(math.sqrt(2) / 2)
    with pytest.raises(ValueError):
        build_envelope(Power(0.5), 1.0, 2.0, 0.0)


def test_explicit_pl_uses_its_knees():
    spec = ExplicitPL(((0, 0), (2, 2), (4, 3), (7, 3.9), (14, 4.6)))
    env = build_envelope(spec, 0.5, 6.0, 0.1)
    assert env.breakpoints.tolist() == [2, 4, 7]
    assert env.epsilon_prime == 0.0
    ys = np.linspace(0, 7, 200)
    assert np.allclose(eval_envelope(env, ys), spec(ys))


def test_grid_ratio_solves_growth_equation():
    for c in (0.3, 0.5, 1.0):
        e = grid_ratio(0.1, c)
        assert (1 + e) ** c == pytest.approx(1.1, rel=1e-12)


def test_sandwich_identity_ratio_one(rng):
    f = CooperativeCost([(Power(1.0), rng.random(8))])
    rep = verify_sandwich(f, build_pl_cost(f, 0.3), exhaustive=True)
    assert rep.passed and rep.max_ratio == pytest.approx(1.0)


def test_sandwich_sqrt_exhaustive(rng):
    f = CooperativeCost([(Power(0.5), rng.uniform(0.1, 1, 12))])
    rep = verify_sandwich(f, build_pl_cost(f, 0.1), exhaustive=True)
    assert rep.passed and rep.checked == 4096 and 1.0 <= rep.max_ratio <= 1.1


def test_zero_load_component_contributes_nothing():
    f = CooperativeCost([(Power(0.5), [1, 0, 0]), (Log1p(1), [0, 1, 1])])
    plc = build_pl_cost(f, 0.1)
    assert plc([0]) == pytest.approx(f([0]))
    assert plc([1]) <= f([1]) and plc([]) == 0.0


def test_dropped_degenerate_component():
    f = CooperativeCost([(Power(0.5), [1, 2, 3]), (Log1p(1), [0, 0, 0])])
    plc = build_pl_cost(f, 0.1)
    assert plc.active == [0] and plc.total_pieces == plc.piece_counts[0]
    with pytest.raises(DegenerateComponentError):
        build_pl_cost(CooperativeCost([(Power(0.5), [0, 0])]), 0.1)


def test_sandwich_reports_witness_for_bad_surrogate(rng):
    f = CooperativeCost([(Power(0.5), rng.uniform(0.5, 1, 6))])
    plc = build_pl_cost(f, 0.1)
    wrong = PLCost(CooperativeCost([(Power(0.5), f.W[0] * 2)]), plc.envelopes, 0.1)
    rep = verify_sandwich(f, wrong, exhaustive=True)
    assert not rep.passed and rep.witness is not None


# ---- envelope invariants ---------------------------------------------------

spec_st = st.one_of(st.floats(0.1, 1.0).map(Power), st.floats(0.2, 5.0).map(Log1p), st.floats(0.2, 5.0).map(Truncation))


@settings(max_examples=150, deadline=None)
@given(spec=spec_st, l=st.floats(0.01, 5.0), ratio=st.floats(1.0, 500.0), eps=st.sampled_from([0.5, 0.1, 0.01]))
def test_envelope_invariants(spec, l, ratio, eps):
    u = l * ratio
    env = build_envelope(spec, l, u, eps)
    b = env.breakpoints
    e = env.epsilon_prime
    # geometric grid reaching u
    assert b[0] == pytest.approx(l) and b[-1] >= u * (1 - 1e-12)
    if len(b) > 1:
        assert np.allclose(b[1:-1] / b[:-2], 1 + e, rtol=1e-12)
    # piece count formula and bound
    assert env.n_pieces == piece_count(l, u, e) == len(b)
    assert env.n_pieces <= math.log(u / l) / math.log1p(e) + 2
    # concavity: slopes nonincreasing from the lead chord on
    assert np.all(np.diff(env.slopes) <= 1e-12 * max(1.0, env.slopes[0]))
    # interpolation at breakpoints
    assert np.allclose(eval_envelope(env, b), spec(b), rtol=1e-12, atol=1e-15)
    # lower bound and (1 + eps) upper bound on [0, last breakpoint]
    ys = np.concatenate([np.linspace(0, b[-1], 400), np.geomspace(l / 10, b[-1], 400)])
    psi = spec(ys)
    pl = eval_envelope(env, ys)
    assert np.all(pl <= psi * (1 + 1e-12) + 1e-15)
    pos = ys >= b[0]
    assert np.all(psi[pos] <= (1 + eps) * pl[pos] * (1 + 1e-12))
    # lead chord below l: zero-load and small loads stay sandwiched by concavity
    assert eval_envelope(env, 0.0) == 0.0


@settings(max_examples=60, deadline=None)
@given(spec=spec_st, l=st.floats(0.05, 2.0), ratio=st.floats(2.0, 100.0))
def test_tangent_bound_within_each_segment(spec, l, ratio):
    env = build_envelope(spec, l, l * ratio, 0.1)
    b = env.breakpoints
    for j in range(len(b) - 1):
        ys = np.linspace(b[j], b[j + 1], 25)
        bound = float(spec(b[j + 1])) / float(spec(b[j]))
        assert bound <= 1.1 * (1 + 1e-12)
        assert np.all(spec(ys) <= bound * eval_envelope(env, ys) * (1 + 1e-12))


def test_last_chord_extrapolates_past_grid():
    env = build_envelope(Power(0.5), 1.0, 16.0, 1.0)
    y = 40.0
    assert eval_envelope(env, y) == pytest.approx(env.slopes[-1] * y + env.intercepts[-1])
