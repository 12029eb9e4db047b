"""Dense revised simplex for ``min c^T x  s.t.  A x = b,  x >= 0``.

Two phases with artificial variables, Bland's rule for both the entering and
the leaving choice, and the basis re-solved from scratch at every iteration
(no product-form updates), so runs are deterministic and drift free.

Tolerance ladder, used everywhere in the package:

=====================  =======================================
``FEAS_TOL``  1e-9     primal feasibility, ``x >= -FEAS_TOL``
``GAP_TOL``   1e-8     relative duality gap
``PIVOT_TOL`` 1e-9     smallest usable pivot / reduced cost
=====================  =======================================
"""
from __future__ import annotations

from dataclasses import dataclass, field

import numpy as np

from .errors import NumericalFailure

FEAS_TOL = 1e-9
GAP_TOL = 1e-8
PIVOT_TOL = 1e-9

OPTIMAL = "optimal"
INFEASIBLE = "infeasible"
UNBOUNDED = "unbounded"


@dataclass(frozen=True, eq=False)
class StandardFormLP:
    c: np.ndarray
    A: np.ndarray
    b: np.ndarray

    def __post_init__(self):
        c = np.asarray(self.c, dtype=float).ravel()
        b = np.asarray(self.b, dtype=float).ravel()
        A = np.asarray(self.A, dtype=float).reshape(b.size, c.size)
        if not (np.all(np.isfinite(c)) and np.all(np.isfinite(A)) and np.all(np.isfinite(b))):
            raise ValueError("LP data must be finite")
        object.__setattr__(self, "c", c)
        object.__setattr__(self, "A", A)
        object.__setattr__(self, "b", b)

    @property
    def shape(self) -> tuple[int, int]:
        return self.A.shape

    def dump(self, fh=None) -> str | None:
        """Plain-text dump: ``rows m cols n``, then ``b``, ``c`` and ``A`` row-major, one vector per line."""
        m, n = self.shape
        lines = [f"rows {m} cols {n}", " ".join(map(repr, self.b.tolist())), " ".join(map(repr, self.c.tolist()))]
        lines += [" ".join(map(repr, row)) for row in self.A.tolist()]
        text = "\n".join(lines) + "\n"
        if fh is None:
            return text
        fh.write(text)
        return None

    @classmethod
    def load(cls, text: str) -> "StandardFormLP":
        lines = [ln for ln in text.splitlines() if ln.strip()]
        head = lines[0].split()
        if len(head) != 4 or head[0] != "rows" or head[2] != "cols":
            raise ValueError("first line must read 'rows m cols n'")
        m, n = int(head[1]), int(head[3])
        vec = lambda s: [float(t) for t in s.split()]
        b, c = vec(lines[1]) if m else [], vec(lines[2]) if n else []
        A = [vec(ln) for ln in lines[3:3 + m]]
        return cls(c=np.array(c), A=np.array(A).reshape(m, n), b=np.array(b))


@dataclass(frozen=True, eq=False)
class LPSolution:
    status: str
    x: np.ndarray | None = None
    y: np.ndarray | None = None
    objective: float | None = None
    basis: tuple[int, ...] = ()
    iterations: int = 0
    dual_objective: float | None = None
    residuals: dict = field(default_factory=dict)
    iterates: tuple = ()

    @property
    def optimal(self) -> bool:
        return self.status == OPTIMAL


class _Simplex:
    """Revised simplex over the columns of ``A`` (artificials appended by the caller)."""

    def __init__(self, A, b, pivot_tol, record):
        self.A, self.b = A, b
        self.m, self.N = A.shape
        self.pivot_tol = pivot_tol
        self.iterations = 0
        self.record = record
        self.trace: list[np.ndarray] = []

    def factor(self, basis):
        B = self.A[:, basis]
        try:
            xB = np.linalg.solve(B, self.b)
        except np.linalg.LinAlgError as exc:
            raise NumericalFailure("singular basis") from exc
        return B, xB

    def run(self, basis: list[int], cost: np.ndarray, allowed: np.ndarray, n_orig: int, max_iter: int) -> str:
        """Pivot until optimal or unbounded; ``basis`` is updated in place."""
        while True:
            B, xB = self.factor(basis)
            if self.record:
                x = np.zeros(self.N)
                x[basis] = xB
                self.trace.append(x[:n_orig].copy())
            y = np.linalg.solve(B.T, cost[basis])
            reduced = cost - self.A.T @ y
            in_basis = np.zeros(self.N, dtype=bool)
            in_basis[basis] = True
            candidates = np.flatnonzero(allowed & ~in_basis & (reduced < -self.pivot_tol))
            if candidates.size == 0:
                return OPTIMAL
            j = int(candidates[0])  # Bland: smallest index
            d = np.linalg.solve(B, self.A[:, j])
            pos = d > self.pivot_tol
            # a basic artificial barred from the basis sits at zero and must not grow
            stuck = ~allowed[basis] & (d < -self.pivot_tol)
            if not (pos.any() or stuck.any()):
                return UNBOUNDED
            ratios = np.full(self.m, np.inf)
            ratios[pos] = np.maximum(xB[pos], 0.0) / d[pos]
            ratios[stuck] = 0.0
            best = ratios.min()
            ties = np.flatnonzero(ratios <= best + 1e-12)
            r = int(min(ties, key=lambda i: basis[i]))  # Bland: smallest basic variable index
            basis[r] = j
            self.iterations += 1
            if self.iterations > max_iter:
                raise NumericalFailure(f"simplex exceeded {max_iter} pivots")


def _solve_once(lp: StandardFormLP, pivot_tol: float, record: bool) -> LPSolution:
    A0, b0, c0 = lp.A, lp.b, lp.c
    m, n = A0.shape
    if m == 0:
        if np.any(c0 < -pivot_tol):
            return LPSolution(UNBOUNDED)
        x = np.zeros(n)
        return _finish(lp, x, np.zeros(0), (), 0, ())
    sign = np.where(b0 < 0, -1.0, 1.0)
    A = np.hstack([A0 * sign[:, None], np.eye(m)])
    b = b0 * sign
    N = n + m
    max_iter = 50 * (N + m) + 1000
    simplex = _Simplex(A, b, pivot_tol, record)
    basis = list(range(n, N))

    # phase I: minimise the sum of artificials
    cost1 = np.concatenate([np.zeros(n), np.ones(m)])
    simplex.run(basis, cost1, np.ones(N, dtype=bool), n, max_iter)
    _, xB = simplex.factor(basis)
    if float(cost1[basis] @ xB) > FEAS_TOL * (1.0 + np.max(np.abs(b))):
        return LPSolution(INFEASIBLE, iterations=simplex.iterations)

    # drive zero-level artificials out of the basis where a nonzero pivot exists
    for r in range(m):
        if basis[r] < n:
            continue
        B, _ = simplex.factor(basis)
        row = np.linalg.solve(B.T, np.eye(m)[r]) @ A[:, :n]
        row[[k for k in basis if k < n]] = 0.0
        cols = np.flatnonzero(np.abs(row) > pivot_tol)
        if cols.size:
            basis[r] = int(cols[0])
        # otherwise the row is redundant and the artificial stays basic at zero

    # phase II over the original columns only
    cost2 = np.concatenate([c0, np.zeros(m)])
    allowed = np.concatenate([np.ones(n, dtype=bool), np.zeros(m, dtype=bool)])
    simplex.trace.clear()
    status = simplex.run(basis, cost2, allowed, n, max_iter)
    if status == UNBOUNDED:
        return LPSolution(UNBOUNDED, iterations=simplex.iterations)
    B, xB = simplex.factor(basis)
    y = np.linalg.solve(B.T, cost2[basis]) * sign
    x = np.zeros(N)
    x[basis] = xB
    return _finish(lp, x[:n], y, tuple(basis), simplex.iterations, tuple(simplex.trace))


def _finish(lp, x, y, basis, iterations, trace) -> LPSolution:
    res = residuals(lp, x, y)
    return LPSolution(
        OPTIMAL, x=x, y=y, objective=float(lp.c @ x), basis=basis,
        iterations=iterations, dual_objective=float(lp.b @ y), residuals=res, iterates=trace,
    )


def solve(lp: StandardFormLP, record: bool = False) -> LPSolution:
    """Solve ``lp``; optimal solutions are basic (vertex) solutions with a dual vector ``y``.

    Singular bases are retried once with a stricter pivot tolerance before
    :class:`NumericalFailure` is raised.  ``record=True`` keeps every phase-II
    primal iterate in ``LPSolution.iterates``.
    """
    try:
        return _solve_once(lp, PIVOT_TOL, record)
    except NumericalFailure:
        return _solve_once(lp, 1e-7, record)


def residuals(lp: StandardFormLP, x: np.ndarray, y: np.ndarray) -> dict[str, float]:
    """Primal, dual and complementarity residuals, recomputed from ``(lp, x, y)`` alone."""
    reduced = lp.c - lp.A.T @ y
    primal_obj = float(lp.c @ x)
    return {
        "primal_infeasibility": float(np.max(np.abs(lp.A @ x - lp.b), initial=0.0)),
        "negativity": float(max(0.0, -np.min(x, initial=0.0))),
        "dual_infeasibility": float(max(0.0, -np.min(reduced, initial=0.0))),
        "complementary_slackness": float(np.max(np.abs(x * reduced), initial=0.0)),
        "duality_gap": abs(primal_obj - float(lp.b @ y)),
    }


@dataclass(frozen=True)
class CertificateCheck:
    quantity: str
    value: float
    bound: float

    @property
    def passed(self) -> bool:
        return self.value <= self.bound

    def as_dict(self) -> dict:
        return {"quantity": self.quantity, "value": self.value, "bound": self.bound, "pass": self.passed}


@dataclass
class CertificateReport:
    checks: list[CertificateCheck]

    @property
    def ok(self) -> bool:
        return all(c.passed for c in self.checks)

    def failed(self) -> list[str]:
        return [c.quantity for c in self.checks if not c.passed]


def check_certificates(lp: StandardFormLP, sol: LPSolution) -> CertificateReport:
    """Recheck an optimal solution's primal/dual pair against the tolerance ladder."""
    if not sol.optimal:
        raise ValueError("certificates exist only for optimal solutions")
    r = residuals(lp, sol.x, sol.y)
    scale_b = 1.0 + float(np.max(np.abs(lp.b), initial=0.0))
    scale_obj = 1.0 + abs(float(lp.c @ sol.x))
    return CertificateReport([
        CertificateCheck("primal_infeasibility", r["primal_infeasibility"], FEAS_TOL * scale_b),
        CertificateCheck("negativity", r["negativity"], FEAS_TOL),
        CertificateCheck("dual_infeasibility", r["dual_infeasibility"], FEAS_TOL * (1.0 + float(np.max(np.abs(lp.c), initial=0.0)))),
        CertificateCheck("complementary_slackness", r["complementary_slackness"], FEAS_TOL),
        CertificateCheck("duality_gap", r["duality_gap"], GAP_TOL * scale_obj),
    ])
