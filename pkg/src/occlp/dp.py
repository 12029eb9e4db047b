"""Dynamic programming on finite deterministic systems.

All per-state minimisations run over contiguous pair-id segments
(``system.offsets``) with ``np.minimum.reduceat``; argmins take the first
minimiser, i.e. the smallest action index.
"""
from __future__ import annotations

from dataclasses import dataclass

import numpy as np

from .errors import MaxIterExceeded
from .model import FiniteControlSystem

DEFAULT_TOL = 1e-10
DEFAULT_MAX_ITER = 10**6
_EPS = np.finfo(float).eps


@dataclass(frozen=True, eq=False)
class ValueFunction:
    """Real values on the states of a system.

    ``tag`` is ``"discounted"``, ``"horizon"`` or ``"potential"``; ``param``
    holds the discount factor or horizon when relevant.
    """

    states: tuple[str, ...]
    values: np.ndarray
    tag: str = "potential"
    param: float | int | None = None
    n_iter: int | None = None
    error_bound: float | None = None

    def __getitem__(self, state: str) -> float:
        return float(self.values[self.states.index(state)])

    def as_dict(self) -> dict[str, float]:
        return {s: float(v) for s, v in zip(self.states, self.values)}

    def __len__(self) -> int:
        return len(self.states)


@dataclass(frozen=True, eq=False)
class Policy:
    """Stationary feedback law: ``choice[i]`` is an action index into ``system.actions[i]``."""

    choice: tuple[int, ...]

    def pair_ids(self, system: FiniteControlSystem) -> np.ndarray:
        return system.offsets[:-1] + np.asarray(self.choice, dtype=int)

    def labels(self, system: FiniteControlSystem) -> dict[str, str]:
        return {s: system.actions[i][a] for i, (s, a) in enumerate(zip(system.states, self.choice))}

    @classmethod
    def from_labels(cls, system: FiniteControlSystem, mapping: dict[str, str]) -> "Policy":
        return cls(tuple(system.actions[i].index(mapping[s]) for i, s in enumerate(system.states)))


def _values(V) -> np.ndarray:
    return np.asarray(V.values if isinstance(V, ValueFunction) else V, dtype=float)


def _segment_min(system: FiniteControlSystem, q: np.ndarray) -> np.ndarray:
    return np.minimum.reduceat(q, system.offsets[:-1])


def _segment_argmin(system: FiniteControlSystem, q: np.ndarray) -> tuple[int, ...]:
    off = system.offsets
    return tuple(int(np.argmin(q[off[i]:off[i + 1]])) for i in range(system.n_states))


def bellman_backup(system: FiniteControlSystem, V, alpha: float) -> tuple[ValueFunction, Policy]:
    """One application of ``V -> min_u { g(y,u) + alpha V(f(y,u)) }`` with its argmin policy."""
    q = system.pair_cost + alpha * _values(V)[system.pair_next]
    new = ValueFunction(system.states, _segment_min(system, q), "discounted", alpha)
    return new, Policy(_segment_argmin(system, q))


def value_iteration(
    system: FiniteControlSystem,
    alpha: float,
    tol: float = DEFAULT_TOL,
    max_iter: int = DEFAULT_MAX_ITER,
) -> ValueFunction:
    """Fixed point of the discounted Bellman operator, started from zero.

    Iterates until the sup-norm residual drops below ``tol (1-alpha) / (2 alpha)``,
    which bounds the distance to the true value function by ``tol``.  That
    residual can sit below double-precision resolution when ``alpha`` is close
    to one, so the target is floored at ``16 eps max(|V|, M, 1)``.  The
    returned ``error_bound`` is the guarantee actually achieved,
    ``2 alpha residual / (1 - alpha)``, which exceeds ``tol`` only in that
    floored regime.
    """
    if not 0.0 < alpha < 1.0:
        raise ValueError(f"alpha must lie in (0, 1), got {alpha}")
    if tol <= 0:
        raise ValueError("tol must be positive")
    g, nxt, starts = system.pair_cost, system.pair_next, system.offsets[:-1]
    target = tol * (1.0 - alpha) / (2.0 * alpha)
    scale = system.cost_bound
    V = np.zeros(system.n_states)
    for it in range(1, max_iter + 1):
        new = np.minimum.reduceat(g + alpha * V[nxt], starts)
        resid = float(np.max(np.abs(new - V)))
        V = new
        floor = 16.0 * _EPS * max(float(np.max(np.abs(V))), scale, 1.0)
        if resid <= max(target, floor):
            bound = 2.0 * alpha * resid / (1.0 - alpha)
            return ValueFunction(system.states, V, "discounted", alpha, n_iter=it, error_bound=bound)
    raise MaxIterExceeded(f"value iteration did not reach residual {target:.3g} in {max_iter} iterations")


def bellman_residual(system: FiniteControlSystem, V, alpha: float) -> float:
    new, _ = bellman_backup(system, V, alpha)
    return float(np.max(np.abs(new.values - _values(V))))


def finite_horizon_value(system: FiniteControlSystem, S: int) -> ValueFunction:
    """Optimal ``S``-step total cost from every state, by backward recursion from ``V(0) = 0``."""
    return finite_horizon_tables(system, S)[0][-1]


def finite_horizon_tables(system: FiniteControlSystem, S: int) -> tuple[list[ValueFunction], list[Policy]]:
    """All stages ``V(0..S)`` and the stage policies ``policies[k]`` optimal with ``k+1`` steps to go."""
    if int(S) != S or S < 1:
        raise ValueError(f"horizon must be a positive integer, got {S}")
    g, nxt = system.pair_cost, system.pair_next
    V = np.zeros(system.n_states)
    tables = [ValueFunction(system.states, V, "horizon", 0)]
    policies = []
    for k in range(1, int(S) + 1):
        q = g + V[nxt]
        V = _segment_min(system, q)
        tables.append(ValueFunction(system.states, V, "horizon", k))
        policies.append(Policy(_segment_argmin(system, q)))
    return tables, policies


def finite_horizon_plan(system: FiniteControlSystem, S: int, y0: str) -> list[str]:
    """An optimal open-loop action sequence of length ``S`` from ``y0``."""
    _, policies = finite_horizon_tables(system, S)
    i = system.state_index[y0]
    plan = []
    for k in range(S, 0, -1):
        a = policies[k - 1].choice[i]
        plan.append(system.actions[i][a])
        i = int(system.pair_next[system.offsets[i] + a])
    return plan


def min_over_initial(V: ValueFunction, scale: float = 1.0) -> tuple[float, str]:
    """``scale * min_y V(y)`` and the first state attaining it."""
    values = _values(V)
    if values.size == 0:
        raise ValueError("empty value function")
    i = int(np.argmin(values))
    return float(scale * values[i]), V.states[i]


def h_operator(system: FiniteControlSystem, psi, alpha: float) -> ValueFunction:
    """``H_psi(y) = min_u { alpha (psi(f(y,u)) - psi(y)) + g(y,u) }``."""
    p = _values(psi)
    q = alpha * (p[system.pair_next] - p[system.pair_state]) + system.pair_cost
    return ValueFunction(system.states, _segment_min(system, q), "potential", alpha)
