import math
from fractions import Fraction

import numpy as np
import pytest
from hypothesis import given, settings, strategies as st

from occlp import model
from occlp.errors import SigmaMismatch
from occlp.measures import default_basis
from occlp.tauberian import (
    BoundedSequence,
    SweepResult,
    abel_mean,
    alpha_sweep,
    cesaro_lower_bound,
    discount_to_horizon_certificate,
    find_cesaro_horizon,
    find_good_start,
    horizon_sweep,
    set_convergence_experiment,
)


def brute_horizon(seq, alpha, eps, limit):
    sigma = abel_mean(seq, alpha)
    lower = cesaro_lower_bound(seq.bound, sigma, alpha, eps)
    sums = np.cumsum(seq.head(limit))
    for T in range(lower, limit + 1):
        if sums[T - 1] / T < sigma + eps + 2 * seq.bound / T:
            return T
    return None


def test_abel_mean_examples():
    assert abel_mean(BoundedSequence((), (3.0,)), 0.37) == pytest.approx(3.0)
    assert abel_mean(BoundedSequence((), (0.0, 1.0, 2.0)), 0.5) == pytest.approx(4 / 7, abs=1e-15)
    assert abel_mean(BoundedSequence((5.0,), (0.0,)), 0.9) == pytest.approx(0.5, abs=1e-15)
    with pytest.raises(ValueError):
        abel_mean(BoundedSequence((1.0, 2.0)), 0.5)


def test_abel_mean_matches_truncated_sum():
    seq = BoundedSequence((1.0, -2.0), (0.5, 3.0, -1.0))
    a = 0.8
    direct = (1 - a) * sum(a**t * seq[t] for t in range(400))
    assert abel_mean(seq, a) == pytest.approx(direct, abs=1e-14)


def test_sequence_basics():
    seq = BoundedSequence((5.0,), (0.0, 1.0))
    assert seq.bound == 5.0
    assert seq.head(5).tolist() == [5.0, 0.0, 1.0, 0.0, 1.0]
    assert seq.prefix_sum(10**6) == 5.0 + (10**6 - 1) // 2
    with pytest.raises(ValueError):
        BoundedSequence((), (2.0,), bound=1.0)
    with pytest.raises(ValueError):
        BoundedSequence()


def test_cesaro_horizon_examples():
    assert find_cesaro_horizon(BoundedSequence((), (0.0, 1.0, 2.0)), 0.5, 0.1) == 1
    const = BoundedSequence((), (2.0,))
    for a, e in ((0.5, 0.1), (0.999, 0.01), (0.99999, 1.0)):
        assert find_cesaro_horizon(const, a, e) == cesaro_lower_bound(2.0, 2.0, a, e)


def test_cesaro_horizon_step_sequence_brute_force():
    seq = BoundedSequence((5.0,), (0.0,))
    T = find_cesaro_horizon(seq, 0.99, 0.05)
    assert T == brute_horizon(seq, 0.99, 0.05, 10**5)


def test_good_start_examples():
    assert find_good_start([2.0, 0.0, 1.0], 1.0, 0.1) == (1, 2)
    assert find_good_start([3.0] * 7, 3.0, 0.01) == (0, 7)
    with pytest.raises(SigmaMismatch):
        find_good_start([1.0, 2.0], 5.0, 0.1)


@settings(max_examples=100, deadline=None)
@given(
    st.lists(st.integers(-20, 20), min_size=0, max_size=5),
    st.lists(st.integers(-20, 20), min_size=1, max_size=5),
    st.floats(0.3, 0.995),
    st.floats(0.01, 2.0),
)
def test_cesaro_horizon_properties(pre, cyc, alpha, eps):
    seq = BoundedSequence(tuple(v / 4 for v in pre), tuple(v / 4 for v in cyc))
    T = find_cesaro_horizon(seq, alpha, eps)
    sigma = abel_mean(seq, alpha)
    v = eps / ((4 * seq.bound + 4 * abs(sigma) + eps) * (-math.log(alpha)))
    assert T >= math.floor(v)
    assert seq.prefix_sum(T) / T < sigma + eps + 2 * seq.bound / T
    assert T == brute_horizon(seq, alpha, eps, T)


@settings(max_examples=100, deadline=None)
@given(st.lists(st.floats(-5, 5, allow_nan=False), min_size=1, max_size=50), st.floats(1e-3, 3.0))
def test_good_start_properties(values, eps):
    sigma = math.fsum(values) / len(values)
    t_star, l = find_good_start(values, sigma, eps)
    q = [Fraction(v) for v in values]
    thr = Fraction(sigma) + Fraction(eps)
    for S in range(1, l + 1):
        assert sum(q[t_star:t_star + S]) <= thr * S
    # maximality: no later start satisfies the defining prefix property
    assert all(sum(q[:s]) <= thr * s for s in range(t_star + 1, len(q) + 1))
    M = max(abs(v) for v in values)
    assert l >= eps * len(values) / (sigma + eps + M) - 1


def test_alpha_sweep_cycle3(cycle3):
    alphas = [0.5, 0.9, 0.99, 0.999]
    res = alpha_sweep(cycle3, alphas)
    expected = [(a + 2 * a * a) / (1 + a + a * a) for a in alphas]
    np.testing.assert_allclose(res.values, expected, atol=1e-9)
    assert res.values[0] == pytest.approx(4 / 7)
    assert res.abs_error[-1] <= 2e-3
    assert res.reference == pytest.approx(1.0)


def test_sweeps_two_state_and_loop(two_state):
    assert alpha_sweep(two_state, [0.3, 0.9]).values == [0.0, 0.0]
    assert horizon_sweep(two_state, [1, 5, 50]).values == [0.0, 0.0, 0.0]
    loop = model.self_loop(2.5)
    np.testing.assert_allclose(alpha_sweep(loop, [0.2, 0.8]).values, [2.5, 2.5])
    assert horizon_sweep(loop, [1, 7]).values == [2.5, 2.5]


def test_horizon_sweep_cycle3(cycle3):
    res = horizon_sweep(cycle3, [3, 4, 30, 300])
    assert res.values[:2] == [1.0, 0.75]
    assert abs(res.values[-1] - 1.0) <= 1 / 150


def test_sweep_grid_checks(cycle3):
    with pytest.raises(ValueError):
        alpha_sweep(cycle3, [0.9, 0.5])
    with pytest.raises(ValueError):
        alpha_sweep(cycle3, [0.5, 1.0])
    with pytest.raises(ValueError):
        SweepResult("alpha", [1, 1], [0.0, 0.0], 0.0)


def test_sweep_csv(cycle3):
    text = horizon_sweep(cycle3, [3, 4]).to_csv()
    assert text.splitlines() == ["parameter,value,reference,abs_error", "3,1.0,1.0,0.0", "4,0.75,1.0,0.25"]


def test_set_convergence_two_state(two_state):
    res = set_convergence_experiment(two_state, [0.5, 0.9, 0.99])
    assert all(b < a for a, b in zip(res.values, res.values[1:]))


def test_set_convergence_cycle3(cycle3):
    res = set_convergence_experiment(cycle3, [0.5, 0.99], basis=default_basis(cycle3))
    assert res.values[1] < res.values[0]
    # whole laps reproduce the uniform measure exactly
    res = set_convergence_experiment(cycle3, [3, 30, 300], kind="horizon")
    assert res.values == pytest.approx([0.0, 0.0, 0.0], abs=1e-12)
    res = set_convergence_experiment(cycle3, [4, 31, 301], kind="horizon")
    assert res.values[2] < res.values[1] < res.values[0]


def test_discount_to_horizon_certificate(two_state, cycle3):
    for s in (two_state, cycle3):
        cert = discount_to_horizon_certificate(s, 0.99)
        assert cert["lower_bound_ok"] and cert["inequality_ok"] and cert["G_T_ok"]
        assert 0 <= cert["t_star"] < cert["T"]
