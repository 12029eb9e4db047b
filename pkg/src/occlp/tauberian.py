"""Abel and Cesaro means, the constructive horizon/start extraction steps, and limit sweeps."""
from __future__ import annotations

import csv
import io
import math
from dataclasses import dataclass, field
from fractions import Fraction
from typing import Sequence

import numpy as np

from .dp import bellman_backup, finite_horizon_tables, min_over_initial, value_iteration
from .errors import InternalError, SigmaMismatch
from .lpform import distance_to_W, distance_to_hull, solve_average, w_vertices
from .measures import (
    TestFunctionBasis,
    control_sequence,
    count_policies,
    default_basis,
    discounted_occupational_measure,
    horizon_occupational_measure,
    pure_policies,
    random_policy,
    trajectory_pairs,
)
from .model import FiniteControlSystem

SEARCH_CAP = 10**9


@dataclass(frozen=True)
class BoundedSequence:
    """``preamble`` followed by ``cycle`` repeated forever; a finite sequence when ``cycle`` is empty.

    ``bound`` defaults to the largest absolute stored value.
    """

    preamble: tuple[float, ...] = ()
    cycle: tuple[float, ...] = ()
    bound: float | None = None

    def __post_init__(self):
        pre = tuple(float(v) for v in self.preamble)
        cyc = tuple(float(v) for v in self.cycle)
        if not pre and not cyc:
            raise ValueError("sequence is empty")
        top = max(abs(v) for v in pre + cyc)
        bound = top if self.bound is None else float(self.bound)
        if bound < top:
            raise ValueError(f"bound {bound} is below max |value| = {top}")
        object.__setattr__(self, "preamble", pre)
        object.__setattr__(self, "cycle", cyc)
        object.__setattr__(self, "bound", bound)

    @property
    def periodic(self) -> bool:
        return bool(self.cycle)

    def __getitem__(self, t: int) -> float:
        P = len(self.preamble)
        if t < P:
            return self.preamble[t]
        if not self.cycle:
            raise IndexError(t)
        return self.cycle[(t - P) % len(self.cycle)]

    def head(self, n: int) -> np.ndarray:
        return np.array([self[t] for t in range(n)])

    def prefix_sum(self, T: int) -> float:
        """``sum_{t < T} value(t)`` without materialising ``T`` terms."""
        P = len(self.preamble)
        if T <= P:
            return math.fsum(self.preamble[:T])
        L = len(self.cycle)
        full, rest = divmod(T - P, L)
        return math.fsum(self.preamble) + full * math.fsum(self.cycle) + math.fsum(self.cycle[:rest])


def abel_mean(seq: BoundedSequence, alpha: float) -> float:
    """``(1 - alpha) sum_t alpha^t value(t)``, summed in closed form over the cycle."""
    if not 0.0 < alpha < 1.0:
        raise ValueError(f"alpha must lie in (0, 1), got {alpha}")
    if not seq.periodic:
        raise ValueError("Abel mean needs an eventually periodic sequence")
    P, L = len(seq.preamble), len(seq.cycle)
    head = math.fsum(v * alpha**t for t, v in enumerate(seq.preamble))
    loop = math.fsum(v * alpha**k for k, v in enumerate(seq.cycle)) / (1.0 - alpha**L)
    return (1.0 - alpha) * (head + alpha**P * loop)


def cesaro_lower_bound(bound: float, sigma: float, alpha: float, eps: float) -> int:
    """Integer part of ``eps / ((4M + 4|sigma| + eps)(-ln alpha))``, raised to at least 1."""
    v = eps / ((4.0 * bound + 4.0 * abs(sigma) + eps) * (-math.log(alpha)))
    return max(1, math.floor(v))


def find_cesaro_horizon(seq: BoundedSequence, alpha: float, eps: float) -> int:
    """Smallest ``T >= cesaro_lower_bound`` with ``(1/T) sum_{t<T} value(t) < sigma + eps + 2M/T``.

    ``sigma`` is the Abel mean at ``alpha``.  Such ``T`` always exists for a
    bounded sequence, so the upward scan terminates; both the lower bound and
    the inequality are re-checked before returning.
    """
    if eps <= 0:
        raise ValueError("eps must be positive")
    sigma = abel_mean(seq, alpha)
    M = seq.bound
    lower = cesaro_lower_bound(M, sigma, alpha, eps)
    T = lower
    total = seq.prefix_sum(T)
    while not total / T < sigma + eps + 2.0 * M / T:
        total += seq[T]
        T += 1
        if T - lower > SEARCH_CAP:
            raise InternalError("Cesaro horizon search exceeded its safety cap")
    if T < lower or not seq.prefix_sum(T) / T < sigma + eps + 2.0 * M / T:
        raise InternalError(f"returned horizon T={T} fails its own postcondition")
    return T


def cesaro_horizon_report(seq: BoundedSequence, alpha: float, eps: float) -> dict:
    sigma = abel_mean(seq, alpha)
    T = find_cesaro_horizon(seq, alpha, eps)
    lower = cesaro_lower_bound(seq.bound, sigma, alpha, eps)
    lhs = seq.prefix_sum(T) / T
    rhs = sigma + eps + 2.0 * seq.bound / T
    return {"sigma": sigma, "bound": seq.bound, "T": T, "T_lower": lower, "average": lhs, "rhs": rhs,
            "lower_bound_ok": T >= lower, "inequality_ok": lhs < rhs}


def find_good_start(values: Sequence[float], sigma: float, eps: float) -> tuple[int, int]:
    """Start ``t*`` after which every running average stays at or below ``sigma + eps``.

    ``t*`` is the largest ``s`` whose prefix average exceeds ``sigma + eps``
    (zero if none does); returns ``(t*, t - t*)``.  Arithmetic is exact
    (floats are converted to fractions) so the maximality argument carries
    over without rounding slack.
    """
    if eps <= 0:
        raise ValueError("eps must be positive")
    q = [Fraction(float(v)) for v in values]
    t = len(q)
    if t == 0:
        raise ValueError("values must be nonempty")
    prefix = [Fraction(0)]
    for v in q:
        prefix.append(prefix[-1] + v)
    mean = prefix[-1] / t
    if abs(Fraction(sigma) - mean) > Fraction(1e-12) * max(1, abs(mean)):
        raise SigmaMismatch(f"sigma={sigma!r} differs from the sequence average {float(mean)!r}")
    thr = Fraction(sigma) + Fraction(eps)
    t_star = max((s for s in range(1, t + 1) if prefix[s] > thr * s), default=0)
    if t_star == t:
        raise SigmaMismatch("eps is below the sigma tolerance; no proper suffix exists")
    l = t - t_star
    for S in range(1, l + 1):
        if prefix[t_star + S] - prefix[t_star] > thr * S:
            raise InternalError(f"suffix average from t*={t_star} exceeds sigma+eps at S={S}")
    return t_star, l


# -- sweeps ------------------------------------------------------------------


@dataclass
class SweepResult:
    """Sweep points ``(parameter, value)`` against a reference limit."""

    kind: str
    parameters: list
    values: list[float]
    reference: float
    details: list[dict] = field(default_factory=list)

    def __post_init__(self):
        if any(b <= a for a, b in zip(self.parameters, self.parameters[1:])):
            raise ValueError("sweep parameters must be strictly increasing")

    @property
    def abs_error(self) -> list[float]:
        return [abs(v - self.reference) for v in self.values]

    def rows(self) -> list[tuple]:
        return [(p, v, self.reference, e) for p, v, e in zip(self.parameters, self.values, self.abs_error)]

    def to_csv(self, fh=None) -> str | None:
        buf = io.StringIO() if fh is None else fh
        w = csv.writer(buf, lineterminator="\n")
        w.writerow(("parameter", "value", "reference", "abs_error"))
        for p, v, r, e in self.rows():
            w.writerow((p, repr(float(v)), repr(float(r)), repr(float(e))))
        return buf.getvalue() if fh is None else None


def _check_increasing(grid, low, high=None):
    grid = list(grid)
    if not grid:
        raise ValueError("grid is empty")
    for x in grid:
        if x <= low or (high is not None and x >= high):
            raise ValueError(f"grid value {x} out of range")
    return grid


def alpha_sweep(system: FiniteControlSystem, alphas: Sequence[float]) -> SweepResult:
    """``min_y (1 - alpha) V_alpha(y)`` along increasing ``alphas``, against ``g*``."""
    alphas = _check_increasing(alphas, 0.0, 1.0)
    g_star = solve_average(system).value
    values, details = [], []
    for a in alphas:
        value, state = min_over_initial(value_iteration(system, a), 1.0 - a)
        values.append(value)
        details.append({"argmin": state})
    return SweepResult("alpha", alphas, values, g_star, details)


def horizon_sweep(system: FiniteControlSystem, horizons: Sequence[int]) -> SweepResult:
    """``G_S = min_y V(S, y) / S`` along increasing ``horizons``, against ``g*``."""
    horizons = [int(S) for S in _check_increasing(horizons, 0)]
    g_star = solve_average(system).value
    tables, _ = finite_horizon_tables(system, horizons[-1])
    values, details = [], []
    for S in horizons:
        # divide rather than scale by 1/S so integer totals give correctly rounded averages
        total, state = min_over_initial(tables[S])
        values.append(total / S)
        details.append({"argmin": state, "bound": 2.0 * system.cost_bound / S})
    return SweepResult("horizon", horizons, values, g_star, details)


def _sample(system: FiniteControlSystem, samples: int | None, seed: int, exhaustive_limit: int):
    n_exhaustive = count_policies(system) * system.n_states
    if samples is None and n_exhaustive <= exhaustive_limit:
        return [(pi, y0) for pi in pure_policies(system) for y0 in system.states]
    rng = np.random.default_rng(seed)
    n = samples if samples is not None else exhaustive_limit
    return [(random_policy(system, rng), system.states[int(rng.integers(system.n_states))]) for _ in range(n)]


def _dedupe(measures):
    out = []
    for g in measures:
        if not any(np.array_equal(g.weights, h.weights) for h in out):
            out.append(g)
    return out


def set_convergence_experiment(
    system: FiniteControlSystem,
    parameters: Sequence,
    kind: str = "alpha",
    basis: TestFunctionBasis | None = None,
    samples: int | None = None,
    seed: int = 0,
    exhaustive_limit: int = 256,
    n_random_vertices: int = 0,
) -> SweepResult:
    """Two-sided Hausdorff deviation between sampled occupational measures and ``W``.

    For each parameter (discount factor for ``kind="alpha"``, horizon for
    ``kind="horizon"``) the sample is every (pure stationary policy, start)
    pair when there are at most ``exhaustive_limit`` of them, otherwise
    ``samples`` seeded random draws.  The value is the larger of the largest
    sampled distance to ``W`` and the largest distance from a vertex of ``W``
    to the convex hull of the sample.
    """
    if kind not in ("alpha", "horizon"):
        raise ValueError("kind must be 'alpha' or 'horizon'")
    if kind == "alpha":
        parameters = _check_increasing(parameters, 0.0, 1.0)
    else:
        parameters = [int(S) for S in _check_increasing(parameters, 0)]
    basis = basis if basis is not None else default_basis(system)
    draws = _sample(system, samples, seed, exhaustive_limit)
    vertices = w_vertices(system, n_random=n_random_vertices, seed=seed)
    values, details = [], []
    for param in parameters:
        if kind == "alpha":
            gammas = [discounted_occupational_measure(system, pi, y0, param) for pi, y0 in draws]
        else:
            gammas = [horizon_occupational_measure(system, control_sequence(system, pi, y0, param), y0) for pi, y0 in draws]
        gammas = _dedupe(gammas)
        outward = max(distance_to_W(g, system, basis) for g in gammas)
        inward = max(distance_to_hull(v, gammas, basis) for v in vertices)
        values.append(max(outward, inward))
        details.append({"sample_to_W": outward, "W_to_hull": inward, "n_sample": len(gammas)})
    return SweepResult(kind, parameters, values, 0.0, details)


# -- from a discounted optimum to a good finite horizon ---------------------


def optimal_cost_sequence(system: FiniteControlSystem, alpha: float) -> tuple[BoundedSequence, str]:
    """Stage costs along the optimal discounted process started where ``(1-alpha) V_alpha`` is smallest."""
    V = value_iteration(system, alpha)
    _, y0 = min_over_initial(V, 1.0 - alpha)
    _, policy = bellman_backup(system, V, alpha)
    pre, cyc = trajectory_pairs(system, policy, y0)
    g = system.pair_cost
    return BoundedSequence(tuple(g[pre]), tuple(g[cyc]), bound=system.cost_bound), y0


def discount_to_horizon_certificate(system: FiniteControlSystem, alpha: float) -> dict:
    """Run both extraction steps on the optimal discounted process with ``eps = sqrt(-ln alpha)``.

    Returns the horizon ``T`` whose average cost is below
    ``sigma + eps + 2M/T``, the resulting bound on ``G_T``, and the good start
    ``t*`` inside the first ``T`` steps (with ``eps = 1/T``).
    """
    seq, y0 = optimal_cost_sequence(system, alpha)
    eps = math.sqrt(-math.log(alpha))
    cert = cesaro_horizon_report(seq, alpha, eps)
    T = cert["T"]
    tables, _ = finite_horizon_tables(system, T)
    G_T, _ = min_over_initial(tables[T], 1.0 / T)
    head = seq.head(T)
    sigma_T = float(np.mean(head))
    t_star, l = find_good_start(head, float(Fraction(math.fsum(head)) / T), 1.0 / T)
    cert.update({
        "start": y0, "eps": eps, "G_T": G_T, "G_T_ok": G_T <= cert["average"] + 1e-12,
        "window_average": sigma_T, "t_star": t_star, "l": l,
    })
    return cert
