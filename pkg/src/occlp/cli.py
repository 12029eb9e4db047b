"""Command-line interface.

Exit codes: 0 success, 1 a verification failed, 2 bad input.
"""
from __future__ import annotations

import argparse
import csv
import json
import math
import sys
from dataclasses import dataclass, field
from pathlib import Path

import numpy as np

from . import lpcore, model
from .dp import value_iteration
from .errors import BadConfig, EmptyInput, ModelError, OcclpError, ParseError
from .lpform import (
    average_dual_slack,
    build_average_lp,
    build_discounted_lp,
    solve_average,
    solve_discounted,
    verify_discounted_duality,
)
from .measures import DEFAULT_J, default_basis
from .model import FiniteControlSystem, GridSpec, build_grid_system, validate
from .tauberian import (
    BoundedSequence,
    alpha_sweep,
    cesaro_horizon_report,
    find_good_start,
    horizon_sweep,
    set_convergence_experiment,
)

EXIT_OK, EXIT_FAILED, EXIT_BAD_INPUT = 0, 1, 2

BUILTIN_SEQUENCES = {
    "cycle012": BoundedSequence((), (0.0, 1.0, 2.0)),
    "step5": BoundedSequence((5.0,), (0.0,)),
    "alternating": BoundedSequence((), (1.0, -1.0)),
}


def load_table(path) -> FiniteControlSystem:
    """Read a ``state,action,next_state,cost`` CSV into a system."""
    rows = []
    with open(path, newline="", encoding="utf-8") as fh:
        reader = csv.reader(fh)
        header = next(reader, None)
        if header is None:
            raise EmptyInput(f"{path}: file is empty")
        if tuple(h.strip() for h in header) != model.TABLE_HEADER:
            raise ParseError(1, f"expected header {','.join(model.TABLE_HEADER)}, got {','.join(header)}")
        for record in reader:
            line = reader.line_num
            if not record or all(not f.strip() for f in record):
                continue
            if len(record) != 4:
                raise ParseError(line, f"expected 4 fields, got {len(record)}")
            state, action, nxt, cost = (f.strip() for f in record)
            try:
                value = float(cost)
            except ValueError:
                raise ParseError(line, f"cost {cost!r} is not a number") from None
            if not math.isfinite(value):
                raise ParseError(line, f"cost {cost!r} is not finite")
            rows.append((state, action, nxt, value))
    if not rows:
        raise EmptyInput(f"{path}: no data rows")
    return model.build_from_table(rows)


@dataclass
class RunConfig:
    """Validated run parameters; exactly one model source."""

    model: str
    alpha: float | None = None
    y0: str | None = None
    grid: list = field(default_factory=list)
    eps: float | None = None
    basis: int = DEFAULT_J
    samples: int | None = None
    seed: int = 0
    tol: float = 1e-8
    lower: list[float] | None = None
    upper: list[float] | None = None
    points: list[int] | None = None
    controls: list[tuple[float, ...]] | None = None

    def check(self) -> "RunConfig":
        if self.alpha is not None and not 0.0 < self.alpha < 1.0:
            raise BadConfig("alpha", f"must lie in (0, 1), got {self.alpha}")
        if self.eps is not None and not self.eps > 0:
            raise BadConfig("eps", f"must be positive, got {self.eps}")
        if self.basis < 1:
            raise BadConfig("basis", f"J must be >= 1, got {self.basis}")
        if self.samples is not None and self.samples < 1:
            raise BadConfig("samples", "must be >= 1")
        if not self.tol > 0:
            raise BadConfig("tol", "must be positive")
        return self

    def system(self) -> FiniteControlSystem:
        src = self.model
        if src.startswith("grid:"):
            name = src[5:]
            if name not in model.GRID_DYNAMICS:
                raise BadConfig("model", f"unknown grid dynamics {name!r}; choose from {sorted(model.GRID_DYNAMICS)}")
            for fld in ("lower", "upper", "points", "controls"):
                if getattr(self, fld) is None:
                    raise BadConfig(fld, "required for grid models")
            try:
                spec = GridSpec(tuple(self.lower), tuple(self.upper), tuple(self.points), tuple(self.controls))
            except ValueError as exc:
                raise BadConfig("grid spec", str(exc)) from None
            f, g = model.GRID_DYNAMICS[name]
            return build_grid_system(spec, f, g)
        if src in model.CATALOG:
            return model.builtin(src)
        if Path(src).exists():
            return load_table(src)
        raise BadConfig("model", f"{src!r} is neither a builtin ({', '.join(model.CATALOG)}), a grid:<dynamics> spec, nor a file")


# -- argument parsing --------------------------------------------------------


def _floats(text):
    return [float(v) for v in str(text).split(",") if v.strip()]


def _ints(text):
    return [int(v) for v in str(text).split(",") if v.strip()]


def _controls(text):
    text = str(text)
    if ";" in text:
        return [tuple(_floats(chunk)) for chunk in text.split(";") if chunk.strip()]
    return [(v,) for v in _floats(text)]


def _parser() -> argparse.ArgumentParser:
    p = argparse.ArgumentParser(prog="occlp", description="Occupation-measure LPs for finite deterministic control systems.")
    sub = p.add_subparsers(dest="command", required=True)

    def with_model(sp):
        sp.add_argument("--model", help="builtin name, path to a CSV table, or grid:<dynamics>")
        sp.add_argument("--config", help="JSON file with run parameters (flags take precedence)")
        sp.add_argument("--lower", type=str, help="grid lower bounds, comma separated")
        sp.add_argument("--upper", type=str, help="grid upper bounds, comma separated")
        sp.add_argument("--points", type=str, help="grid points per dimension, comma separated")
        sp.add_argument("--controls", type=str, help="control grid: scalars 'a,b,c' or vectors 'a,b;c,d'")
        sp.add_argument("--out", help="output file (default: stdout)")
        return sp

    with_model(sub.add_parser("validate", help="check model invariants"))
    with_model(sub.add_parser("export", help="write the model as a CSV table"))
    sp = with_model(sub.add_parser("solve-discounted", help="DP value vs discounted LP primal and dual"))
    sp.add_argument("--alpha", type=float)
    sp.add_argument("--y0")
    sp.add_argument("--tol", type=float)
    sp = with_model(sub.add_parser("solve-average", help="long-run average LP with its dual certificate"))
    sp.add_argument("--tol", type=float)
    for name, help_ in (("sweep-alpha", "min over starts of (1-alpha) V_alpha"), ("sweep-horizon", "G_S = min over starts of V(S, y)/S")):
        sp = with_model(sub.add_parser(name, help=help_))
        sp.add_argument("--grid", required=False)
    sp = with_model(sub.add_parser("set-convergence", help="Hausdorff deviation between occupational measures and W"))
    sp.add_argument("--grid")
    sp.add_argument("--kind", choices=("alpha", "horizon"), default="alpha")
    sp.add_argument("--samples", type=int)
    sp.add_argument("--basis", type=int)
    sp.add_argument("--seed", type=int)
    sp = with_model(sub.add_parser("dump-lp", help="dump an occupation-measure LP in the plain text format"))
    sp.add_argument("--alpha", type=float, help="discounted LP (omit for the average LP)")
    sp.add_argument("--y0")
    sp = sub.add_parser("tauberian", help="horizon and good-start extraction on a bounded sequence")
    sp.add_argument("--seq", required=True, help=f"JSON file or builtin ({', '.join(BUILTIN_SEQUENCES)})")
    sp.add_argument("--alpha", type=float, required=True)
    sp.add_argument("--eps", type=float, required=True)
    sp.add_argument("--window", type=int, default=100, help="length of the finite window for the good-start step")
    sp.add_argument("--out")
    return p


def _default(value, fallback):
    return fallback if value is None else value


def _config(args) -> RunConfig:
    extra = {}
    if getattr(args, "config", None):
        try:
            extra = json.loads(Path(args.config).read_text(encoding="utf-8"))
        except (OSError, json.JSONDecodeError) as exc:
            raise BadConfig("config", str(exc)) from None
        if not isinstance(extra, dict):
            raise BadConfig("config", "top level must be a JSON object")

    def pick(name, convert=None):
        val = getattr(args, name, None)
        if val is None:
            val = extra.get(name)
        if val is None or convert is None:
            return val
        try:
            return convert(val)
        except (TypeError, ValueError):
            raise BadConfig(name, f"cannot parse {val!r}") from None

    src = pick("model")
    if not src:
        raise BadConfig("model", "a model source is required")
    grid_kind = float if args.command in ("sweep-alpha",) or (args.command == "set-convergence" and (pick("kind") or "alpha") == "alpha") else int
    grid = pick("grid", lambda v: [grid_kind(x) for x in (v if isinstance(v, list) else str(v).split(",")) if str(x).strip()])
    cfg = RunConfig(
        model=str(src),
        alpha=pick("alpha", float),
        y0=pick("y0", str),
        grid=grid or [],
        basis=_default(pick("basis", int), DEFAULT_J),
        samples=pick("samples", int),
        seed=_default(pick("seed", int), 0),
        tol=_default(pick("tol", float), 1e-8),
        lower=pick("lower", lambda v: v if isinstance(v, list) else _floats(v)),
        upper=pick("upper", lambda v: v if isinstance(v, list) else _floats(v)),
        points=pick("points", lambda v: v if isinstance(v, list) else _ints(v)),
        controls=pick("controls", lambda v: [tuple(np.atleast_1d(u)) for u in v] if isinstance(v, list) else _controls(v)),
    )
    return cfg.check()


def _emit(text: str, out) -> None:
    if out:
        Path(out).write_text(text, encoding="utf-8")
    else:
        sys.stdout.write(text)


def _json(obj) -> str:
    return json.dumps(obj, indent=2) + "\n"


def _measure_rows(gamma) -> list[dict]:
    rows = []
    for p, w in enumerate(gamma.weights.tolist()):
        s, a = gamma.system.pair_label(p)
        rows.append({"pair_id": p, "state": s, "action": a, "weight": w})
    return rows


# -- subcommands -------------------------------------------------------------


def cmd_validate(args, cfg):
    try:
        system = cfg.system()
    except ModelError as exc:
        report = {"subcommand": "validate", "model": cfg.model, "valid": False,
                  "violations": [{"kind": type(exc).__name__, "state": getattr(exc, "state", None),
                                  "action": getattr(exc, "action", None), "detail": str(exc)}],
                  "n_states": None, "n_pairs": None, "cost_bound": None}
        _emit(_json(report), args.out)
        return EXIT_FAILED
    rep = validate(system)
    report = {"subcommand": "validate", "model": cfg.model, **rep.as_dict(),
              "n_states": system.n_states, "n_pairs": system.n_pairs, "cost_bound": system.cost_bound}
    _emit(_json(report), args.out)
    return EXIT_OK if rep.ok else EXIT_FAILED


def cmd_export(args, cfg):
    _emit(model.write_table(cfg.system()), args.out)
    return EXIT_OK


def cmd_solve_discounted(args, cfg):
    system = cfg.system()
    if cfg.alpha is None:
        raise BadConfig("alpha", "required")
    y0 = cfg.y0 if cfg.y0 is not None else system.states[0]
    if y0 not in system.state_index:
        raise BadConfig("y0", f"unknown state {y0!r}")
    V = value_iteration(system, cfg.alpha)
    report = verify_discounted_duality(system, y0, cfg.alpha, cfg.tol, values=V)
    _, gamma, dual = solve_discounted(system, y0, cfg.alpha)
    out = {
        "subcommand": "solve-discounted", "model": cfg.model, "alpha": cfg.alpha, "y0": y0,
        "dp_value": report["dp_value"].value, "lp_primal": report["lp_primal"].value, "lp_dual": report["lp_dual"].value,
        "gap_dp_primal": report["gap_dp_primal"].value, "gap_primal_dual": report["gap_primal_dual"].value,
        "checks": report.records(), "measure": _measure_rows(gamma),
        "potential": dual.psi.as_dict(), "value_function": V.as_dict(), "pass": report.ok,
    }
    _emit(_json(out), args.out)
    return EXIT_OK if report.ok else EXIT_FAILED


def cmd_solve_average(args, cfg):
    system = cfg.system()
    alp = build_average_lp(system)
    sol = lpcore.solve(alp.lp)
    if not sol.optimal:
        raise OcclpError(f"average LP status {sol.status}")
    g_star, mu = sol.objective, float(sol.y[-1])
    slack = float(average_dual_slack(system, sol.y[:-1], mu).min())
    certs = lpcore.check_certificates(alp.lp, sol)
    checks = [{"quantity": "gap_primal_mu", "value": abs(g_star - mu), "bound": cfg.tol, "pass": abs(g_star - mu) <= cfg.tol},
              {"quantity": "dual_min_slack", "value": slack, "bound": -cfg.tol, "pass": slack >= -cfg.tol}]
    checks += [c.as_dict() for c in certs.checks]
    _, gamma, dual = solve_average(system)
    ok = all(c["pass"] for c in checks)
    out = {"subcommand": "solve-average", "model": cfg.model, "g_star": g_star, "mu": mu,
           "checks": checks, "measure": _measure_rows(gamma), "potential": dual.psi.as_dict(), "pass": ok}
    _emit(_json(out), args.out)
    return EXIT_OK if ok else EXIT_FAILED


def cmd_sweep(args, cfg):
    system = cfg.system()
    if not cfg.grid:
        raise BadConfig("grid", "required")
    try:
        res = alpha_sweep(system, cfg.grid) if args.command == "sweep-alpha" else horizon_sweep(system, cfg.grid)
    except ValueError as exc:
        raise BadConfig("grid", str(exc)) from None
    _emit(res.to_csv(), args.out)
    return EXIT_OK


def cmd_set_convergence(args, cfg):
    system = cfg.system()
    if not cfg.grid:
        raise BadConfig("grid", "required")
    basis = default_basis(system, cfg.basis)
    try:
        res = set_convergence_experiment(system, cfg.grid, kind=args.kind or "alpha", basis=basis,
                                         samples=cfg.samples, seed=cfg.seed)
    except ValueError as exc:
        raise BadConfig("grid", str(exc)) from None
    _emit(res.to_csv(), args.out)
    return EXIT_OK


def cmd_dump_lp(args, cfg):
    system = cfg.system()
    if cfg.alpha is None:
        lp = build_average_lp(system).lp
    else:
        lp = build_discounted_lp(system, cfg.y0 or system.states[0], cfg.alpha).lp
    _emit(lp.dump(), args.out)
    return EXIT_OK


def _load_sequence(ref: str) -> BoundedSequence:
    if ref in BUILTIN_SEQUENCES:
        return BUILTIN_SEQUENCES[ref]
    try:
        data = json.loads(Path(ref).read_text(encoding="utf-8"))
        return BoundedSequence(tuple(data.get("preamble", ())), tuple(data.get("cycle", ())), data.get("bound"))
    except (OSError, json.JSONDecodeError, AttributeError, ValueError, TypeError) as exc:
        raise BadConfig("seq", f"{ref!r}: {exc}") from None


def cmd_tauberian(args):
    if not 0.0 < args.alpha < 1.0:
        raise BadConfig("alpha", f"must lie in (0, 1), got {args.alpha}")
    if not args.eps > 0:
        raise BadConfig("eps", f"must be positive, got {args.eps}")
    if args.window < 1:
        raise BadConfig("window", "must be >= 1")
    seq = _load_sequence(args.seq)
    if not seq.periodic:
        raise BadConfig("seq", "needs a nonempty cycle")
    rep = cesaro_horizon_report(seq, args.alpha, args.eps)
    head = seq.head(args.window)
    sigma_w = math.fsum(head) / len(head)
    t_star, l = find_good_start(head, sigma_w, args.eps)
    growth = args.eps * len(head) / (sigma_w + args.eps + seq.bound) - 1.0
    out = {
        "subcommand": "tauberian",
        "sequence": {"preamble": list(seq.preamble), "cycle": list(seq.cycle), "bound": seq.bound},
        "alpha": args.alpha, "eps": args.eps, **rep,
        "window": len(head), "window_sigma": sigma_w, "t_star": t_star, "l": l,
        "growth_bound": growth, "growth_ok": l >= growth,
    }
    out["pass"] = bool(out["lower_bound_ok"] and out["inequality_ok"] and out["growth_ok"])
    _emit(_json(out), args.out)
    return EXIT_OK if out["pass"] else EXIT_FAILED


COMMANDS = {
    "validate": cmd_validate,
    "export": cmd_export,
    "solve-discounted": cmd_solve_discounted,
    "solve-average": cmd_solve_average,
    "sweep-alpha": cmd_sweep,
    "sweep-horizon": cmd_sweep,
    "set-convergence": cmd_set_convergence,
    "dump-lp": cmd_dump_lp,
}


def run(argv=None) -> int:
    parser = _parser()
    try:
        args = parser.parse_args(argv)
    except SystemExit as exc:
        return int(exc.code or 0)
    try:
        if args.command == "tauberian":
            return cmd_tauberian(args)
        cfg = _config(args)
        return COMMANDS[args.command](args, cfg)
    except (BadConfig, ModelError, OSError) as exc:
        print(f"error: {type(exc).__name__}: {exc}", file=sys.stderr)
        return EXIT_BAD_INPUT
    except OcclpError as exc:
        print(f"error: {type(exc).__name__}: {exc}", file=sys.stderr)
        return EXIT_FAILED


def main() -> None:
    sys.exit(run())
