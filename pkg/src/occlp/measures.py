"""Occupational measures on the admissible pairs of a finite system.

Trajectories of deterministic finite systems under stationary (or
eventually periodic) controls are eventually periodic, so discounted
measures are summed in closed form: a preamble of distinct pairs followed by
a cycle repeated forever.
"""
from __future__ import annotations

import csv
import io
import itertools
from dataclasses import dataclass
from typing import Callable, Sequence

import numpy as np

from .dp import Policy
from .errors import BasisMismatch, EmptySet, InadmissibleControl
from .model import FiniteControlSystem

DEFAULT_J = 8


@dataclass(frozen=True, eq=False)
class OccupationalMeasure:
    """Probability weights over ``system``'s pair index.

    ``provenance`` is a tuple such as ``("discounted", alpha, y0)``,
    ``("horizon", S, y0)``, ``("lp", ...)`` or ``("abstract",)``.
    """

    system: FiniteControlSystem
    weights: np.ndarray
    provenance: tuple = ("abstract",)

    def __post_init__(self):
        w = np.asarray(self.weights, dtype=float)
        if w.shape != (self.system.n_pairs,):
            raise ValueError(f"expected {self.system.n_pairs} weights, got shape {w.shape}")
        object.__setattr__(self, "weights", w)

    @classmethod
    def dirac(cls, system: FiniteControlSystem, pair: int) -> "OccupationalMeasure":
        w = np.zeros(system.n_pairs)
        w[pair] = 1.0
        return cls(system, w, ("dirac", pair))

    def total(self) -> float:
        return float(self.weights.sum())

    def as_dict(self) -> dict[tuple[str, str], float]:
        return {self.system.pair_label(p): float(w) for p, w in enumerate(self.weights)}

    def to_csv(self, fh=None) -> str | None:
        """Rows ``pair_id,state,action,weight``; returns the text when ``fh`` is None."""
        buf = io.StringIO() if fh is None else fh
        w = csv.writer(buf, lineterminator="\n")
        w.writerow(("pair_id", "state", "action", "weight"))
        for p, weight in enumerate(self.weights):
            s, a = self.system.pair_label(p)
            w.writerow((p, s, a, repr(float(weight))))
        return buf.getvalue() if fh is None else None


@dataclass(frozen=True)
class PeriodicControl:
    """Open-loop control ``prefix`` followed by ``cycle`` repeated forever (action labels)."""

    prefix: tuple[str, ...]
    cycle: tuple[str, ...]

    def __post_init__(self):
        if not self.cycle:
            raise ValueError("cycle must be nonempty")


def _step(system: FiniteControlSystem, i: int, action: str) -> int:
    try:
        a = system.actions[i].index(action)
    except ValueError:
        raise InadmissibleControl(f"action {action!r} is not admissible at state {system.states[i]!r}") from None
    return int(system.offsets[i] + a)


def trajectory_pairs(system: FiniteControlSystem, control, y0: str) -> tuple[list[int], list[int]]:
    """Pair ids visited from ``y0``, split into a transient preamble and the repeating cycle."""
    i = system.state_index[y0]
    if isinstance(control, Policy):
        ids = control.pair_ids(system)
        seen: dict[int, int] = {}
        path: list[int] = []
        while i not in seen:
            seen[i] = len(path)
            p = int(ids[i])
            path.append(p)
            i = int(system.pair_next[p])
        k = seen[i]
        return path[:k], path[k:]
    if isinstance(control, PeriodicControl):
        path = []
        for action in control.prefix:
            p = _step(system, i, action)
            path.append(p)
            i = int(system.pair_next[p])
        pre = len(path)
        L = len(control.cycle)
        seen = {}
        t = 0
        while (i, t % L) not in seen:
            seen[(i, t % L)] = t
            p = _step(system, i, control.cycle[t % L])
            path.append(p)
            i = int(system.pair_next[p])
            t += 1
        k = pre + seen[(i, t % L)]
        return path[:k], path[k:]
    raise TypeError("control must be a Policy or a PeriodicControl")


def control_sequence(system: FiniteControlSystem, control, y0: str, S: int) -> list[str]:
    """First ``S`` action labels generated by ``control`` from ``y0``."""
    pre, cyc = trajectory_pairs(system, control, y0)
    seq = (pre + cyc * (S // len(cyc) + 1))[:S]
    return [system.pair_action[p] for p in seq]


def discounted_occupational_measure(system: FiniteControlSystem, control, y0: str, alpha: float) -> OccupationalMeasure:
    """``(1 - alpha) sum_t alpha^t`` delta at the pair visited at time ``t``, summed exactly."""
    if not 0.0 < alpha < 1.0:
        raise ValueError(f"alpha must lie in (0, 1), got {alpha}")
    pre, cyc = trajectory_pairs(system, control, y0)
    P, L = len(pre), len(cyc)
    w = np.zeros(system.n_pairs)
    if P:
        np.add.at(w, pre, (1.0 - alpha) * alpha ** np.arange(P))
    np.add.at(w, cyc, (1.0 - alpha) * alpha ** (P + np.arange(L)) / (1.0 - alpha**L))
    return OccupationalMeasure(system, w, ("discounted", alpha, y0))


def horizon_occupational_measure(system: FiniteControlSystem, controls: Sequence[str], y0: str) -> OccupationalMeasure:
    """Empirical pair frequencies of the first ``len(controls)`` steps from ``y0``."""
    S = len(controls)
    if S < 1:
        raise ValueError("control sequence must be nonempty")
    i = system.state_index[y0]
    w = np.zeros(system.n_pairs)
    for action in controls:
        p = _step(system, i, action)
        w[p] += 1.0
        i = int(system.pair_next[p])
    return OccupationalMeasure(system, w / S, ("horizon", S, y0))


def _as_pair_values(system: FiniteControlSystem, q) -> np.ndarray:
    if callable(q):
        return np.array([q(*system.pair_label(p)) for p in range(system.n_pairs)], dtype=float)
    q = np.asarray(q, dtype=float)
    if q.shape != (system.n_pairs,):
        raise ValueError(f"function values must have shape ({system.n_pairs},)")
    return q


def integrate(gamma: OccupationalMeasure, q) -> float:
    """``sum_p gamma_p q(p)``; ``q`` is a vector over pairs or a callable ``q(state, action)``."""
    return float(gamma.weights @ _as_pair_values(gamma.system, q))


# -- test-function basis and the metric rho ---------------------------------


@dataclass(frozen=True, eq=False)
class TestFunctionBasis:
    """``J`` functions on pairs (rows of ``values``) with weights ``2^-j``, ``j = 1..J``."""

    values: np.ndarray
    names: tuple[str, ...] = ()

    __test__ = False  # not a pytest class

    def __post_init__(self):
        v = np.atleast_2d(np.asarray(self.values, dtype=float))
        if v.shape[0] < 1:
            raise ValueError("basis needs at least one function")
        if np.max(np.abs(v)) > 1.0 + 1e-12:
            raise ValueError("basis functions must be bounded by 1 in sup norm")
        object.__setattr__(self, "values", v)

    @property
    def J(self) -> int:
        return self.values.shape[0]

    @property
    def n_pairs(self) -> int:
        return self.values.shape[1]

    @property
    def weights(self) -> np.ndarray:
        return 0.5 ** np.arange(1, self.J + 1)

    def moments(self, gamma: OccupationalMeasure) -> np.ndarray:
        self.check(gamma)
        return self.values @ gamma.weights

    def check(self, gamma: OccupationalMeasure) -> None:
        if gamma.system.n_pairs != self.n_pairs:
            raise BasisMismatch(f"basis is defined on {self.n_pairs} pairs, measure on {gamma.system.n_pairs}")


def _monomial_exponents(nvars: int):
    """Exponent tuples ordered by max degree, then total degree, then lexicographically descending."""
    deg = 0
    while True:
        block = [e for e in itertools.product(range(deg + 1), repeat=nvars) if max(e, default=0) == deg]
        block.sort(key=lambda e: (sum(e), tuple(-x for x in e)))
        yield from block
        deg += 1


def default_basis(system: FiniteControlSystem, J: int = DEFAULT_J) -> TestFunctionBasis:
    """Canonical test functions for ``system``.

    Tabular systems: a ramp over the pair index (which alone separates all
    pairs), then the pair indicators in canonical order, then the state
    indicators, then higher powers of the ramp.  Grid systems: monomials in
    the state and control coordinates, ``1, y, u, y u, ...``, each divided by
    its sup norm over the admissible pairs.
    """
    if J < 1:
        raise ValueError("J must be at least 1")
    n = system.n_pairs
    rows, names = [], []
    if system.is_grid:
        coords = np.hstack([system.state_points[system.pair_state], system.pair_controls])
        d = system.state_points.shape[1]
        var = [f"y{i}" for i in range(d)] + [f"u{i}" for i in range(coords.shape[1] - d)]
        for e in _monomial_exponents(coords.shape[1]):
            if len(rows) == J:
                break
            m = np.prod(coords ** np.asarray(e), axis=1)
            top = np.max(np.abs(m))
            rows.append(m / top if top > 0 else m)
            names.append("*".join(f"{v}^{k}" if k > 1 else v for v, k in zip(var, e) if k) or "1")
    else:
        ramp = np.linspace(-1.0, 1.0, n) if n > 1 else np.ones(1)
        eye = np.eye(n)
        gen = itertools.chain(
            [(ramp, "ramp")],
            ((eye[p], f"pair[{p}]") for p in range(n)),
            (((system.pair_state == i).astype(float), f"state[{s}]") for i, s in enumerate(system.states)),
            ((ramp**k, f"ramp^{k}") for k in itertools.count(2)),
        )
        for vec, name in itertools.islice(gen, J):
            rows.append(vec)
            names.append(name)
    return TestFunctionBasis(np.array(rows), tuple(names))


def rho(gamma1: OccupationalMeasure, gamma2: OccupationalMeasure, basis: TestFunctionBasis) -> float:
    """Truncated weak-* metric ``sum_j 2^-j |<q_j, gamma1> - <q_j, gamma2>|``."""
    if gamma1.system is not gamma2.system and gamma1.system.n_pairs != gamma2.system.n_pairs:
        raise BasisMismatch("measures live on different systems")
    basis.check(gamma1)
    basis.check(gamma2)
    return float(basis.weights @ np.abs(basis.values @ (gamma1.weights - gamma2.weights)))


def distance_to_set(gamma: OccupationalMeasure, measures: Sequence[OccupationalMeasure], basis: TestFunctionBasis) -> float:
    if not measures:
        raise EmptySet("set of measures is empty")
    return min(rho(gamma, other, basis) for other in measures)


def hausdorff(set1: Sequence[OccupationalMeasure], set2: Sequence[OccupationalMeasure], basis: TestFunctionBasis) -> float:
    """Hausdorff deviation between two finite sets of measures under ``rho``."""
    if not set1 or not set2:
        raise EmptySet("both sets must be nonempty")
    m1 = np.array([basis.moments(g) for g in set1])
    m2 = np.array([basis.moments(g) for g in set2])
    D = np.abs(m1[:, None, :] - m2[None, :, :]) @ basis.weights
    return float(max(D.min(axis=1).max(), D.min(axis=0).max()))


def pure_policies(system: FiniteControlSystem):
    """Every stationary deterministic policy, in lexicographic order of action indices."""
    for choice in itertools.product(*(range(len(a)) for a in system.actions)):
        yield Policy(tuple(choice))


def count_policies(system: FiniteControlSystem) -> int:
    return int(np.prod([len(a) for a in system.actions], dtype=object))


def random_policy(system: FiniteControlSystem, rng: np.random.Generator) -> Policy:
    return Policy(tuple(int(rng.integers(len(a))) for a in system.actions))


def evaluate_pairs(system: FiniteControlSystem, q: Callable[[str, str], float]) -> np.ndarray:
    return _as_pair_values(system, q)
