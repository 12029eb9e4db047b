from fractions import Fraction

import numpy as np
import pytest
from hypothesis import given, settings, strategies as st

from conftest import enumerated_discounted_values, enumerated_horizon_value
from occlp import model
from occlp.dp import (
    ValueFunction,
    bellman_backup,
    bellman_residual,
    finite_horizon_plan,
    finite_horizon_value,
    h_operator,
    min_over_initial,
    value_iteration,
)
from occlp.errors import MaxIterExceeded


def _zero(system):
    return ValueFunction(system.states, np.zeros(system.n_states), "discounted")


def test_backup_two_state(two_state):
    new, policy = bellman_backup(two_state, _zero(two_state), 0.5)
    assert list(new.values) == [1.0, 0.0]
    assert policy.labels(two_state) == {"s0": "stay", "s1": "stay"}


def test_backup_cycle3(cycle3):
    new, _ = bellman_backup(cycle3, _zero(cycle3), 0.5)
    assert list(new.values) == [0.0, 1.0, 2.0]


def test_backup_zero_costs_stays_zero():
    s = model.build_from_table([("a", "x", "b", 0), ("b", "y", "a", 0), ("b", "z", "b", 0)])
    new, _ = bellman_backup(s, _zero(s), 0.7)
    assert not new.values.any()


@pytest.mark.parametrize("alpha, expected", [(0.5, 2.0), (0.9, 5.0)])
def test_value_iteration_two_state(two_state, alpha, expected):
    V = value_iteration(two_state, alpha, tol=1e-12)
    assert V["s0"] == pytest.approx(expected, abs=1e-11)
    assert V["s1"] == 0.0
    assert V.error_bound <= 1e-12


def test_value_iteration_cycle3_closed_form(cycle3):
    a = 0.5
    V = value_iteration(cycle3, a, tol=1e-12)
    expected = [(a + 2 * a * a) / (1 - a**3), (1 + 2 * a) / (1 - a**3), (2 + a**2) / (1 - a**3)]
    assert V["s0"] == pytest.approx(8 / 7, abs=1e-11)
    np.testing.assert_allclose(V.values, expected, atol=1e-11)


def test_value_iteration_close_to_one_reports_bound(lq1d):
    V = value_iteration(lq1d, 0.999)
    assert V.error_bound < 1e-6
    assert bellman_residual(lq1d, V, 0.999) <= 1e-12


def test_value_iteration_max_iter(two_state):
    with pytest.raises(MaxIterExceeded):
        value_iteration(two_state, 0.99, tol=1e-12, max_iter=3)
    with pytest.raises(ValueError):
        value_iteration(two_state, 1.0)


@pytest.mark.parametrize("S, expected", [(1, 1.0), (3, 3.0), (10, 5.0)])
def test_finite_horizon_two_state(two_state, S, expected):
    V = finite_horizon_value(two_state, S)
    assert V["s0"] == expected and V["s1"] == 0.0


def test_finite_horizon_one_step_is_min_cost():
    s = model.random_system(np.random.default_rng(3))
    V = finite_horizon_value(s, 1)
    for i, st_ in enumerate(s.states):
        assert V[st_] == min(s.costs[i])


def test_finite_horizon_rejects_bad_horizon(two_state):
    with pytest.raises(ValueError):
        finite_horizon_value(two_state, 0)
    with pytest.raises(ValueError):
        finite_horizon_value(two_state, 2.5)


def test_horizon_plan_attains_value():
    s = model.random_system(np.random.default_rng(11), max_states=4, max_actions=3)
    V = finite_horizon_value(s, 5)
    for y0 in s.states:
        plan = finite_horizon_plan(s, 5, y0)
        i, total = s.state_index[y0], 0.0
        for a in plan:
            p = s.pair_id(s.states[i], a)
            total += s.pair_cost[p]
            i = int(s.pair_next[p])
        assert total == V[y0]


def test_min_over_initial(two_state, cycle3):
    for a in (0.3, 0.9):
        assert min_over_initial(value_iteration(two_state, a), 1 - a) == (0.0, "s1")
    assert min_over_initial(finite_horizon_value(cycle3, 3), 1 / 3) == (1.0, "s0")
    value, state = min_over_initial(finite_horizon_value(cycle3, 4), 1 / 4)
    assert Fraction(value) == Fraction(3, 4) and state == "s0"


def test_h_operator(two_state):
    H = h_operator(two_state, np.zeros(2), 0.9)
    assert list(H.values) == [1.0, 0.0]
    c = np.full(2, 7.0)
    np.testing.assert_array_equal(h_operator(two_state, c, 0.3).values, [1.0, 0.0])


@settings(max_examples=40, deadline=None)
@given(st.integers(0, 2**32 - 1), st.sampled_from([0.3, 0.5, 0.9, 0.95]))
def test_value_iteration_matches_policy_enumeration(seed, alpha):
    s = model.random_system(np.random.default_rng(seed), max_states=4, max_actions=3)
    V = value_iteration(s, alpha, tol=1e-10)
    np.testing.assert_allclose(V.values, enumerated_discounted_values(s, alpha), atol=1e-9)
    # value function identity for the H operator: H_V(y) = (1 - alpha) V(y)
    H = h_operator(s, V, alpha)
    np.testing.assert_allclose(H.values, (1 - alpha) * V.values, atol=1e-9)


@settings(max_examples=30, deadline=None)
@given(st.integers(0, 2**32 - 1), st.integers(1, 5))
def test_finite_horizon_matches_enumeration(seed, S):
    s = model.random_system(np.random.default_rng(seed), max_states=4, max_actions=3)
    V = finite_horizon_value(s, S)
    for y0 in s.states:
        assert V[y0] == enumerated_horizon_value(s, S, y0)
