"""Finite deterministic control systems.

A system is a finite state set, an admissible action list per state, a
deterministic transition for every admissible (state, action) pair and a
bounded stage cost.  Admissible pairs are enumerated state-major in input
order; that enumeration (the *pair index*) is what every LP column, measure
weight and basis function is aligned with.
"""
from __future__ import annotations

import csv
import io
import itertools
from dataclasses import dataclass, field
from functools import cached_property
from typing import Callable, Iterable, Sequence

import numpy as np

from .errors import (
    DanglingTarget,
    DuplicatePair,
    EmptyInput,
    NoAdmissibleAction,
)

TABLE_HEADER = ("state", "action", "next_state", "cost")


@dataclass(frozen=True, eq=False)
class FiniteControlSystem:
    """Immutable finite control system.

    ``actions[i]``, ``targets[i]`` and ``costs[i]`` are aligned lists for
    ``states[i]``.  Grid systems additionally carry the coordinates of every
    state (``state_points``) and the control value of every admissible pair
    (``pair_controls``).

    The constructor does not enforce the invariants so that broken systems can
    be handed to :func:`validate`; use :func:`build_from_table` or
    :func:`build_grid_system` to get checked instances.
    """

    states: tuple[str, ...]
    actions: tuple[tuple[str, ...], ...]
    targets: tuple[tuple[str, ...], ...]
    costs: tuple[tuple[float, ...], ...]
    state_points: np.ndarray | None = field(default=None, repr=False)
    pair_controls: np.ndarray | None = field(default=None, repr=False)

    @property
    def n_states(self) -> int:
        return len(self.states)

    @property
    def n_pairs(self) -> int:
        return sum(len(a) for a in self.actions)

    @property
    def is_grid(self) -> bool:
        return self.state_points is not None

    @cached_property
    def state_index(self) -> dict[str, int]:
        return {s: i for i, s in enumerate(self.states)}

    @cached_property
    def offsets(self) -> np.ndarray:
        """``offsets[i]:offsets[i+1]`` is the pair-id range of state ``i``."""
        return np.concatenate([[0], np.cumsum([len(a) for a in self.actions])]).astype(int)

    @cached_property
    def pair_state(self) -> np.ndarray:
        return np.repeat(np.arange(self.n_states), [len(a) for a in self.actions])

    @cached_property
    def pair_action(self) -> tuple[str, ...]:
        return tuple(itertools.chain.from_iterable(self.actions))

    @cached_property
    def pair_next(self) -> np.ndarray:
        out = np.empty(self.n_pairs, dtype=int)
        k = 0
        for s, acts, tgts in zip(self.states, self.actions, self.targets):
            for a, t in zip(acts, tgts):
                if t not in self.state_index:
                    raise DanglingTarget(s, a, t)
                out[k] = self.state_index[t]
                k += 1
        return out

    @cached_property
    def pair_cost(self) -> np.ndarray:
        return np.fromiter(itertools.chain.from_iterable(self.costs), dtype=float, count=self.n_pairs)

    @cached_property
    def pair_lookup(self) -> dict[tuple[str, str], int]:
        return {(self.states[s], a): p for p, (s, a) in enumerate(zip(self.pair_state, self.pair_action))}

    @property
    def cost_bound(self) -> float:
        """Exact ``max |g|`` over admissible pairs."""
        return float(np.max(np.abs(self.pair_cost))) if self.n_pairs else 0.0

    def pair_id(self, state: str, action: str) -> int:
        return self.pair_lookup[(state, action)]

    def pair_label(self, p: int) -> tuple[str, str]:
        return self.states[self.pair_state[p]], self.pair_action[p]

    def to_rows(self) -> list[tuple[str, str, str, float]]:
        return [
            (s, a, t, float(c))
            for s, acts, tgts, cs in zip(self.states, self.actions, self.targets, self.costs)
            for a, t, c in zip(acts, tgts, cs)
        ]

    def same_table(self, other: "FiniteControlSystem") -> bool:
        """True when both systems have identical states, pair index, transitions and costs."""
        return self.states == other.states and self.to_rows() == other.to_rows()


def build_from_table(rows: Iterable[Sequence]) -> FiniteControlSystem:
    """Build a system from ``(state, action, next_state, cost)`` rows.

    States are ordered by first appearance in the ``state`` column.  Every
    ``next_state`` must be one of those states.
    """
    rows = [tuple(r) for r in rows]
    if not rows:
        raise EmptyInput("no rows")
    order: dict[str, list] = {}
    seen = set()
    for state, action, nxt, cost in rows:
        state, action, nxt = str(state), str(action), str(nxt)
        if (state, action) in seen:
            raise DuplicatePair(state, action)
        seen.add((state, action))
        order.setdefault(state, []).append((action, nxt, float(cost)))
    for state, entries in order.items():
        for action, nxt, _ in entries:
            if nxt not in order:
                raise DanglingTarget(state, action, nxt)
    states = tuple(order)
    return FiniteControlSystem(
        states=states,
        actions=tuple(tuple(e[0] for e in order[s]) for s in states),
        targets=tuple(tuple(e[1] for e in order[s]) for s in states),
        costs=tuple(tuple(e[2] for e in order[s]) for s in states),
    )


def write_table(system: FiniteControlSystem, fh=None) -> str | None:
    """Write the system as a ``state,action,next_state,cost`` CSV.

    Costs use ``repr`` so that reading the file back reproduces them bit for
    bit.  With ``fh=None`` the CSV text is returned.
    """
    buf = io.StringIO() if fh is None else fh
    w = csv.writer(buf, lineterminator="\n")
    w.writerow(TABLE_HEADER)
    for s, a, t, c in system.to_rows():
        w.writerow((s, a, t, repr(c)))
    return buf.getvalue() if fh is None else None


# -- grid discretization -----------------------------------------------------


@dataclass(frozen=True)
class GridSpec:
    """Box ``[lower, upper]`` sampled with ``points`` nodes per dimension, plus a finite control grid."""

    lower: tuple[float, ...]
    upper: tuple[float, ...]
    points: tuple[int, ...]
    controls: tuple[tuple[float, ...], ...]

    def __post_init__(self):
        lo = tuple(float(v) for v in np.atleast_1d(self.lower))
        hi = tuple(float(v) for v in np.atleast_1d(self.upper))
        pts = tuple(int(v) for v in np.atleast_1d(self.points))
        if len(pts) == 1 and len(lo) > 1:
            pts = pts * len(lo)
        ctl = tuple(tuple(float(x) for x in np.atleast_1d(u)) for u in self.controls)
        object.__setattr__(self, "lower", lo)
        object.__setattr__(self, "upper", hi)
        object.__setattr__(self, "points", pts)
        object.__setattr__(self, "controls", ctl)
        if not (len(lo) == len(hi) == len(pts)) or not lo:
            raise ValueError("lower, upper and points must have one entry per state dimension")
        if not all(np.isfinite(lo + hi)):
            raise ValueError("grid bounds must be finite")
        if any(l >= h for l, h in zip(lo, hi)):
            raise ValueError("each lower bound must be below its upper bound")
        if any(n < 2 for n in pts):
            raise ValueError("at least 2 points per dimension are required")
        if not ctl:
            raise ValueError("control grid must be nonempty")
        if len({len(u) for u in ctl}) != 1:
            raise ValueError("all control values must have the same dimension")

    @property
    def dim(self) -> int:
        return len(self.lower)

    def axes(self) -> list[np.ndarray]:
        return [np.linspace(l, h, n) for l, h, n in zip(self.lower, self.upper, self.points)]

    def nodes(self) -> np.ndarray:
        """Grid nodes in row-major order, shape ``(N, dim)``."""
        mesh = np.meshgrid(*self.axes(), indexing="ij")
        return np.stack([m.ravel() for m in mesh], axis=1)

    def contains(self, y: np.ndarray) -> bool:
        slack = 1e-12 * (np.asarray(self.upper) - np.asarray(self.lower))
        return bool(np.all(y >= np.asarray(self.lower) - slack) and np.all(y <= np.asarray(self.upper) + slack))

    def project(self, y: np.ndarray) -> int:
        """Row-major index of the nearest node; ties go to the smaller index per axis."""
        idx = 0
        for axis, n, v in zip(self.axes(), self.points, np.atleast_1d(y)):
            # argmin returns the first minimiser, i.e. the smaller index on ties
            idx = idx * n + int(np.argmin(np.abs(axis - v)))
        return idx


def _fmt(v: Iterable[float]) -> str:
    return ";".join(f"{float(x):.12g}" for x in v)


def build_grid_system(
    spec: GridSpec,
    f: Callable[[np.ndarray, np.ndarray], np.ndarray],
    g: Callable[[np.ndarray, np.ndarray], float],
) -> FiniteControlSystem:
    """Discretize ``y(t+1) = f(y, u)`` with stage cost ``g`` on a grid.

    A control is admissible at a node when ``f(y, u)`` lies in the box; the
    successor is then the nearest node.  Raises :class:`NoAdmissibleAction`
    listing every node with no admissible control.
    """
    nodes = spec.nodes()
    labels = tuple(_fmt(y) for y in nodes)
    controls = [np.asarray(u) for u in spec.controls]
    actions, targets, costs, pair_controls, dead = [], [], [], [], []
    for label, y in zip(labels, nodes):
        acts, tgts, cs = [], [], []
        for u in controls:
            y_next = np.atleast_1d(np.asarray(f(y.copy(), u.copy()), dtype=float))
            if y_next.shape != (spec.dim,):
                raise ValueError(f"dynamics returned shape {y_next.shape}, expected ({spec.dim},)")
            if not spec.contains(y_next):
                continue
            acts.append(_fmt(u))
            tgts.append(labels[spec.project(y_next)])
            cs.append(float(g(y.copy(), u.copy())))
            pair_controls.append(u)
        if not acts:
            dead.append(label)
        actions.append(tuple(acts))
        targets.append(tuple(tgts))
        costs.append(tuple(cs))
    if dead:
        raise NoAdmissibleAction(dead)
    return FiniteControlSystem(
        states=labels,
        actions=tuple(actions),
        targets=tuple(targets),
        costs=tuple(costs),
        state_points=nodes,
        pair_controls=np.array(pair_controls, dtype=float).reshape(len(pair_controls), -1),
    )


# -- validation --------------------------------------------------------------


@dataclass(frozen=True)
class Violation:
    kind: str
    state: str | None = None
    action: str | None = None
    detail: str = ""

    def as_dict(self) -> dict:
        return {"kind": self.kind, "state": self.state, "action": self.action, "detail": self.detail}


@dataclass
class ValidationReport:
    violations: list[Violation] = field(default_factory=list)

    @property
    def ok(self) -> bool:
        return not self.violations

    def kinds(self) -> set[str]:
        return {v.kind for v in self.violations}

    def as_dict(self) -> dict:
        return {"valid": self.ok, "violations": [v.as_dict() for v in self.violations]}


def validate(system: FiniteControlSystem) -> ValidationReport:
    """Check every structural invariant; never raises on a bad system."""
    report = ValidationReport()
    add = report.violations.append
    if not system.states:
        add(Violation("EmptyInput", detail="system has no states"))
        return report
    if len(set(system.states)) != len(system.states):
        dupes = sorted({s for s in system.states if system.states.count(s) > 1})
        for s in dupes:
            add(Violation("DuplicateState", s))
    lengths = (len(system.actions), len(system.targets), len(system.costs))
    if any(n != system.n_states for n in lengths):
        add(Violation("Malformed", detail=f"per-state lists have lengths {lengths}, expected {system.n_states}"))
        return report
    known = set(system.states)
    for s, acts, tgts, cs in zip(system.states, system.actions, system.targets, system.costs):
        if not (len(acts) == len(tgts) == len(cs)):
            add(Violation("Malformed", s, detail="actions, targets and costs differ in length"))
            continue
        if not acts:
            add(Violation("NoAdmissibleAction", s, detail="A(y) is empty"))
        seen = set()
        for a, t, c in zip(acts, tgts, cs):
            if a in seen:
                add(Violation("DuplicatePair", s, a))
            seen.add(a)
            if t not in known:
                add(Violation("DanglingTarget", s, a, detail=f"target {t!r} is not a listed state"))
            if not np.isfinite(c):
                add(Violation("NonFiniteCost", s, a, detail=repr(c)))
    if report.ok:
        if len(system.pair_lookup) != system.n_pairs:
            add(Violation("PairIndex", detail="pair index is not a bijection"))
        if system.state_points is not None and len(system.state_points) != system.n_states:
            add(Violation("Malformed", detail="state_points does not match the state list"))
        if system.pair_controls is not None and len(system.pair_controls) != system.n_pairs:
            add(Violation("Malformed", detail="pair_controls does not match the pair index"))
    return report


# -- catalog -----------------------------------------------------------------


def two_state() -> FiniteControlSystem:
    """Stay at ``s0`` for cost 1 per step, or pay 5 once to reach the free absorbing ``s1``."""
    return build_from_table([("s0", "stay", "s0", 1), ("s0", "go", "s1", 5), ("s1", "stay", "s1", 0)])


def cycle3() -> FiniteControlSystem:
    """Forced three-cycle ``s0 -> s1 -> s2 -> s0`` with costs 0, 1, 2."""
    return build_from_table([("s0", "next", "s1", 0), ("s1", "next", "s2", 1), ("s2", "next", "s0", 2)])


def self_loop(cost: float = 0.0) -> FiniteControlSystem:
    return build_from_table([("s", "a", "s", cost)])


def integrator(y, u):
    return y + u


def quadratic_cost(y, u):
    return float(np.dot(y, y) + np.dot(u, u))


def lq1d(points: int = 11, controls: Sequence[float] = (-0.4, -0.2, 0.0, 0.2, 0.4)) -> FiniteControlSystem:
    """Integrator ``y + u`` on ``[-1, 1]`` with cost ``y^2 + u^2``."""
    spec = GridSpec(lower=(-1.0,), upper=(1.0,), points=(points,), controls=tuple((u,) for u in controls))
    return build_grid_system(spec, integrator, quadratic_cost)


CATALOG: dict[str, Callable[[], FiniteControlSystem]] = {
    "two_state": two_state,
    "cycle3": cycle3,
    "lq1d": lq1d,
}

GRID_DYNAMICS = {
    "integrator": (integrator, quadratic_cost),
}


def builtin(name: str) -> FiniteControlSystem:
    try:
        return CATALOG[name]()
    except KeyError:
        raise KeyError(f"unknown builtin model {name!r}; choose from {sorted(CATALOG)}") from None


def random_system(
    rng: np.random.Generator,
    max_states: int = 6,
    max_actions: int = 4,
    cost_range: tuple[int, int] = (-9, 9),
) -> FiniteControlSystem:
    """Random viable system with integer costs; every state gets 1..max_actions actions."""
    n = int(rng.integers(1, max_states + 1))
    rows = []
    for i in range(n):
        for k in range(int(rng.integers(1, max_actions + 1))):
            rows.append((f"s{i}", f"a{k}", f"s{int(rng.integers(n))}", int(rng.integers(cost_range[0], cost_range[1] + 1))))
    return build_from_table(rows)
