"""Occupation-measure linear programs of a finite control system.

On a finite state set the state indicators span every test function, so the
families of constraints "for all continuous phi" collapse to one equality per
state.  Column ``p`` of every LP here is admissible pair ``p``.

Sign conventions for the duals: with rows written as below, the simplex dual
vector is directly the potential ``psi`` that appears in the Bellman
inequalities ``psi(y) - alpha psi(f(y,u)) <= g(y,u)`` (discounted) and
``mu <= g(y,u) + psi(f(y,u)) - psi(y)`` (long-run average), so ``psi`` is
comparable to the value function without any renormalisation.
"""
from __future__ import annotations

import json
from dataclasses import dataclass
from typing import NamedTuple, Sequence

import numpy as np

from . import lpcore
from .dp import ValueFunction, value_iteration
from .errors import EmptySet, Infeasible, NumericalFailure
from .lpcore import StandardFormLP
from .measures import OccupationalMeasure, TestFunctionBasis
from .model import FiniteControlSystem

def _incidence(system: FiniteControlSystem) -> tuple[np.ndarray, np.ndarray]:
    """``E[y, p] = 1{state(p) = y}`` and ``F[y, p] = 1{f(p) = y}``."""
    n, m = system.n_pairs, system.n_states
    E = np.zeros((m, n))
    F = np.zeros((m, n))
    E[system.pair_state, np.arange(n)] = 1.0
    F[system.pair_next, np.arange(n)] = 1.0
    return E, F


@dataclass(frozen=True, eq=False)
class DiscountedLP:
    """Rows: ``sum_u gamma(y',u) - alpha sum_{f(y,u)=y'} gamma(y,u) = (1-alpha) 1{y'=y0}``."""

    system: FiniteControlSystem
    lp: StandardFormLP
    y0: str
    alpha: float

    def residual(self, gamma: OccupationalMeasure) -> float:
        return float(np.max(np.abs(self.lp.A @ gamma.weights - self.lp.b)))


@dataclass(frozen=True, eq=False)
class AverageLP:
    """Flow-balance row per state plus a final normalisation row ``sum gamma = 1``."""

    system: FiniteControlSystem
    lp: StandardFormLP

    def residual(self, gamma: OccupationalMeasure) -> float:
        return float(np.max(np.abs(self.lp.A @ gamma.weights - self.lp.b)))


@dataclass(frozen=True, eq=False)
class DualPotential:
    psi: ValueFunction
    objective: float
    mu: float | None = None


class LPResult(NamedTuple):
    value: float
    measure: OccupationalMeasure
    dual: DualPotential


def build_discounted_lp(system: FiniteControlSystem, y0: str, alpha: float) -> DiscountedLP:
    if not 0.0 < alpha < 1.0:
        raise ValueError(f"alpha must lie in (0, 1), got {alpha}")
    E, F = _incidence(system)
    b = np.zeros(system.n_states)
    b[system.state_index[y0]] = 1.0 - alpha
    lp = StandardFormLP(c=system.pair_cost.copy(), A=E - alpha * F, b=b)
    return DiscountedLP(system, lp, y0, alpha)


def build_average_lp(system: FiniteControlSystem) -> AverageLP:
    E, F = _incidence(system)
    A = np.vstack([E - F, np.ones((1, system.n_pairs))])
    b = np.zeros(system.n_states + 1)
    b[-1] = 1.0
    return AverageLP(system, StandardFormLP(c=system.pair_cost.copy(), A=A, b=b))


def _measure(system, x, provenance) -> OccupationalMeasure:
    return OccupationalMeasure(system, np.where(x < 0.0, 0.0, x), provenance)


def _solve(lp: StandardFormLP) -> lpcore.LPSolution:
    sol = lpcore.solve(lp)
    if sol.status == lpcore.INFEASIBLE:
        raise Infeasible("occupation-measure LP is infeasible; the model violates viability")
    if not sol.optimal:
        raise NumericalFailure(f"occupation-measure LP returned status {sol.status}")
    return sol


def solve_discounted(system: FiniteControlSystem, y0: str, alpha: float) -> LPResult:
    """Optimal discounted measure, its value and the dual potential with ``(1-alpha) psi(y0)`` = dual objective."""
    dlp = build_discounted_lp(system, y0, alpha)
    sol = _solve(dlp.lp)
    psi = ValueFunction(system.states, sol.y.copy(), "potential", alpha)
    dual = DualPotential(psi, sol.dual_objective)
    return LPResult(sol.objective, _measure(system, sol.x, ("lp", "discounted", alpha, y0)), dual)


def solve_average(system: FiniteControlSystem) -> LPResult:
    """Optimal stationary measure, ``g*`` and the dual pair ``(mu, psi)``."""
    alp = build_average_lp(system)
    sol = _solve(alp.lp)
    psi = ValueFunction(system.states, sol.y[:-1].copy(), "potential")
    dual = DualPotential(psi, sol.dual_objective, mu=float(sol.y[-1]))
    return LPResult(sol.objective, _measure(system, sol.x, ("lp", "average")), dual)


def discounted_dual_slack(system: FiniteControlSystem, psi, alpha: float) -> np.ndarray:
    """``g + alpha psi(f) - psi`` on every pair; nonnegative iff ``psi`` is dual feasible."""
    p = np.asarray(getattr(psi, "values", psi), dtype=float)
    return system.pair_cost + alpha * p[system.pair_next] - p[system.pair_state]


def average_dual_slack(system: FiniteControlSystem, psi, mu: float) -> np.ndarray:
    """``g + psi(f) - psi - mu`` on every pair."""
    p = np.asarray(getattr(psi, "values", psi), dtype=float)
    return system.pair_cost + p[system.pair_next] - p[system.pair_state] - mu


def maxmin_value(system: FiniteControlSystem, psi, y0: str, alpha: float) -> float:
    """Inner infimum of the discounted max-min problem evaluated at ``psi``."""
    p = np.asarray(getattr(psi, "values", psi), dtype=float)
    i0 = system.state_index[y0]
    # g + alpha (psi(f) - psi(y)) + (1 - alpha)(psi(y0) - psi(y)) collapses to slack + (1 - alpha) psi(y0)
    return float(discounted_dual_slack(system, p, alpha).min() + (1.0 - alpha) * p[i0])


# -- distances to W ----------------------------------------------------------


def _abs_value_lp(core_A, core_b, core_c_len, Q, target, wts) -> StandardFormLP:
    """Append ``Q x + s+ - s- = target`` with objective ``wts . (s+ + s-)`` to a block of rows."""
    J = Q.shape[0]
    rows_core = np.hstack([core_A, np.zeros((core_A.shape[0], 2 * J))])
    rows_abs = np.hstack([Q, np.eye(J), -np.eye(J)])
    A = np.vstack([rows_core, rows_abs])
    b = np.concatenate([core_b, target])
    c = np.concatenate([np.zeros(core_c_len), wts, wts])
    return StandardFormLP(c=c, A=A, b=b)


def distance_to_W(gamma: OccupationalMeasure, system: FiniteControlSystem, basis: TestFunctionBasis) -> float:
    """``min_{gamma' in W} rho(gamma, gamma')`` as an LP with split absolute values."""
    basis.check(gamma)
    alp = build_average_lp(system)
    lp = _abs_value_lp(alp.lp.A, alp.lp.b, system.n_pairs, basis.values, basis.moments(gamma), basis.weights)
    return max(0.0, _solve(lp).objective)


def distance_to_hull(gamma: OccupationalMeasure, measures: Sequence[OccupationalMeasure], basis: TestFunctionBasis) -> float:
    """``rho`` distance from ``gamma`` to the convex hull of ``measures``."""
    if not measures:
        raise EmptySet("hull of an empty set")
    basis.check(gamma)
    M = np.array([basis.moments(g) for g in measures]).T  # J x K moment matrix
    K = M.shape[1]
    lp = _abs_value_lp(np.ones((1, K)), np.ones(1), K, M, basis.moments(gamma), basis.weights)
    return max(0.0, _solve(lp).objective)


def w_vertices(system: FiniteControlSystem, n_random: int = 0, seed: int = 0) -> list[OccupationalMeasure]:
    """Distinct vertices of ``W`` found by solving the average LP under sampled objectives.

    Objectives are ``-e_p`` for every pair (push weight onto ``p``), then
    ``n_random`` seeded Gaussian directions.  Vertices are deduplicated at
    ``1e-9``; the list is exhaustive only when every vertex is exposed by one
    of those objectives.
    """
    alp = build_average_lp(system)
    rng = np.random.default_rng(seed)
    objectives = [-np.eye(system.n_pairs)[p] for p in range(system.n_pairs)]
    objectives += [rng.standard_normal(system.n_pairs) for _ in range(n_random)]
    found: list[np.ndarray] = []
    for c in objectives:
        sol = _solve(StandardFormLP(c=c, A=alp.lp.A, b=alp.lp.b))
        x = np.where(sol.x < 0.0, 0.0, sol.x)
        if not any(np.max(np.abs(x - v)) <= 1e-9 for v in found):
            found.append(x)
    return [OccupationalMeasure(system, v, ("vertex", "W")) for v in found]


# -- equality check between DP and LP ---------------------------------------


@dataclass(frozen=True)
class Check:
    quantity: str
    value: float
    bound: float | None
    passed: bool

    def as_dict(self) -> dict:
        return {"quantity": self.quantity, "value": self.value, "bound": self.bound, "pass": self.passed}


@dataclass
class Report:
    checks: list[Check]

    @property
    def ok(self) -> bool:
        return all(c.passed for c in self.checks)

    def __getitem__(self, quantity: str) -> Check:
        for c in self.checks:
            if c.quantity == quantity:
                return c
        raise KeyError(quantity)

    def records(self) -> list[dict]:
        return [c.as_dict() for c in self.checks]

    def to_json(self) -> str:
        return json.dumps(self.records(), indent=2)


def verify_discounted_duality(
    system: FiniteControlSystem,
    y0: str,
    alpha: float,
    tol: float = 1e-8,
    values: ValueFunction | None = None,
) -> Report:
    """Compare ``(1-alpha) V_alpha(y0)`` from value iteration with the LP primal and dual optima.

    Also checks that ``psi = V_alpha`` satisfies the dual constraints and
    attains the max-min value.  ``values`` may carry a precomputed value
    function for ``alpha`` to avoid repeating value iteration per ``y0``.
    """
    V = values if values is not None else value_iteration(system, alpha)
    dp_value = (1.0 - alpha) * V[y0]
    value, _, dual = solve_discounted(system, y0, alpha)
    slack = float(discounted_dual_slack(system, V, alpha).min())
    attained = maxmin_value(system, V, y0, alpha)
    checks = [
        Check("dp_value", dp_value, None, True),
        Check("lp_primal", value, None, True),
        Check("lp_dual", dual.objective, None, True),
        Check("gap_dp_primal", abs(dp_value - value), tol, abs(dp_value - value) <= tol),
        Check("gap_primal_dual", abs(value - dual.objective), tol, abs(value - dual.objective) <= tol),
        Check("value_function_dual_slack", slack, -tol, slack >= -tol),
        Check("maxmin_at_value_function", abs(attained - value), tol, abs(attained - value) <= tol),
    ]
    return Report(checks)
