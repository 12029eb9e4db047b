import itertools

import numpy as np
import pytest

from occlp import model
from occlp.lpcore import StandardFormLP
from occlp.measures import pure_policies

ACCEPTANCE_KEY = pytest.StashKey[list]()


def pytest_configure(config):
    config.stash[ACCEPTANCE_KEY] = []


def pytest_terminal_summary(terminalreporter, exitstatus, config):
    lines = config.stash.get(ACCEPTANCE_KEY, [])
    if not lines:
        return
    terminalreporter.section("acceptance criteria")
    for line in sorted(lines, key=lambda s: int(s.split()[1].rstrip(":"))):
        terminalreporter.write_line(line)


@pytest.fixture
def acceptance(request):
    """Record one PASS/FAIL line for an acceptance criterion."""

    def record(number, title, ok, detail=""):
        line = f"criterion {number}: {'PASS' if ok else 'FAIL'}  {title}" + (f"  [{detail}]" if detail else "")
        print(line)
        request.config.stash[ACCEPTANCE_KEY].append(line)
        return ok

    return record


@pytest.fixture
def two_state():
    return model.two_state()


@pytest.fixture
def cycle3():
    return model.cycle3()


@pytest.fixture
def lq1d():
    return model.lq1d()


# -- independent oracles ------------------------------------------------------


def policy_values(system, policy, alpha):
    """Discounted cost of a stationary policy by solving ``(I - alpha P) V = g``."""
    ids = policy.pair_ids(system)
    n = system.n_states
    P = np.zeros((n, n))
    P[np.arange(n), system.pair_next[ids]] = 1.0
    return np.linalg.solve(np.eye(n) - alpha * P, system.pair_cost[ids])


def enumerated_discounted_values(system, alpha):
    """``V_alpha`` as the pointwise minimum over all pure stationary policies."""
    return np.min([policy_values(system, pi, alpha) for pi in pure_policies(system)], axis=0)


def enumerated_horizon_value(system, S, y0):
    """Minimum ``S``-step cost from ``y0`` over every action sequence."""
    best = None
    i0 = system.state_index[y0]
    for seq in itertools.product(*[range(max(len(a) for a in system.actions))] * S):
        i, total, ok = i0, 0.0, True
        for k in seq:
            if k >= len(system.actions[i]):
                ok = False
                break
            p = system.offsets[i] + k
            total += system.pair_cost[p]
            i = int(system.pair_next[p])
        if ok and (best is None or total < best):
            best = total
    return best


def geometric_measure(system, pairs, alpha, terms=None):
    """Discounted measure of an explicit eventually periodic pair path by truncated summation."""
    pre, cyc = pairs
    w = np.zeros(system.n_pairs)
    terms = terms or int(np.ceil(np.log(1e-17) / np.log(alpha))) + len(pre) + 1
    path = list(pre) + list(cyc) * (terms // len(cyc) + 1)
    for t in range(terms):
        w[path[t]] += (1 - alpha) * alpha**t
    return w


def enumerate_bfs(A, b, c, tol=1e-9):
    """Smallest objective over all basic feasible solutions; None when there are none.

    Dependent rows are dropped first (the system is assumed consistent).
    """
    keep = []
    for i in range(A.shape[0]):
        if np.linalg.matrix_rank(A[keep + [i]]) == len(keep) + 1:
            keep.append(i)
    A, b = A[keep], b[keep]
    m, n = A.shape
    best = None
    for cols in itertools.combinations(range(n), m):
        B = A[:, cols]
        if abs(np.linalg.det(B)) < 1e-10:
            continue
        xB = np.linalg.solve(B, b)
        if np.min(xB) < -tol:
            continue
        val = float(c[list(cols)] @ xB)
        if best is None or val < best:
            best = val
    return best


def random_feasible_lp(rng, integer=False):
    """Bounded feasible LP: the last row has positive coefficients and ``b = A x0`` with ``x0 >= 0``."""
    n = int(rng.integers(2, 9))
    m = int(rng.integers(1, min(n, 5) + 1))
    if integer:
        A = rng.integers(-3, 4, size=(m, n)).astype(float)
        A[-1] = rng.integers(1, 4, size=n)
        x0 = rng.integers(0, 3, size=n).astype(float)
        c = rng.integers(-5, 6, size=n).astype(float)
    else:
        A = rng.standard_normal((m, n))
        A[-1] = rng.uniform(0.5, 2.0, size=n)
        x0 = rng.uniform(0, 1, size=n) * (rng.uniform(size=n) < 0.7)
        c = rng.standard_normal(n)
    if not x0.any():
        x0[0] = 1.0
    return StandardFormLP(c=c, A=A, b=A @ x0)
