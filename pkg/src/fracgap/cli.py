"""Command-line interface.

Every subcommand reads the same INI config (``--config``) and accepts one
flag per config key (``--s``, ``--eps-list``, ``--case``, ``--out``, ...)
which overrides the file.  Exit codes: 0 success, 2 validation failure,
3 numerical failure.
"""

from __future__ import annotations

import argparse
import json
import sys
from pathlib import Path

import numpy as np

from . import config as config_mod
from .config import SCHEMA, ConfigError, RunConfig
from .construct import (
    HypothesisViolated,
    LiftSpec,
    ResolutionError,
    construction_constants,
    lift_ball,
    schedule_delta,
)
from .energy import DoubleWell, PhaseField, ResourceError, f_eps, frac_perimeter, h_functional
from .geometry import FAR_EMPTY, ConfigurationError, DeltaTooLarge, NotClean, SetRegion, clean_balls
from .minimize import DescentOptions, EnumerationTooLarge, minimize_feps, set_from_domain_signs, write_trace
from .pipeline import (
    StageError,
    case_config,
    eps_point,
    make_datum,
    make_grid,
    read_csv,
    resolve_b,
    run,
    sharp_minimizer,
    transfer_field,
    _json_default,
)
from .quadrature import QuadratureError, adaptive_pair_integral, cache_path, get_table
from .regions import ExpressionError, parse_field, parse_number, parse_region
from .verify import DomainError, check_almost_min, check_mu_divergence, check_trivial_ladder, fit_scaling

EXIT_OK, EXIT_VALIDATION, EXIT_NUMERICAL = 0, 2, 3

VALIDATION_ERRORS = (ConfigError, ExpressionError, ConfigurationError, DomainError)
NUMERICAL_ERRORS = (
    StageError,
    NotClean,
    DeltaTooLarge,
    HypothesisViolated,
    ResolutionError,
    QuadratureError,
    ResourceError,
    EnumerationTooLarge,
    FloatingPointError,
    ArithmeticError,
)


def _number_arg(text: str) -> float:
    try:
        return parse_number(text)
    except ExpressionError as exc:
        raise argparse.ArgumentTypeError(str(exc)) from exc


def _flag(name: str) -> str:
    return "--" + name.replace("_", "-")


def _add_config_flags(p: argparse.ArgumentParser) -> None:
    p.add_argument("--config", help="INI configuration file")
    grp = p.add_argument_group("config overrides")
    for key in SCHEMA:
        grp.add_argument(_flag(key.name), dest=f"cfg_{key.name}", metavar="VALUE",
                         help=f"[{key.section}] {key.help} (default {key.default})")


def _load_config(args) -> RunConfig:
    overrides = {k[4:]: v for k, v in vars(args).items() if k.startswith("cfg_") and v is not None}
    return config_mod.load(args.config, overrides)


def _emit(data) -> None:
    print(json.dumps(data, indent=2, sort_keys=True, default=_json_default))


# ---------------------------------------------------------------------------
# Subcommands
# ---------------------------------------------------------------------------

def cmd_energy(args) -> int:
    cfg = _load_config(args)
    grid = make_grid(cfg, cfg.base_h)
    g = make_datum(cfg, grid)
    out: dict = {"h": grid.h, "s": cfg.s}
    if args.set is not None:
        region = parse_region(args.set)
        signs = np.where(region.contains(grid.centers[grid.omega_index]), 1.0, -1.0)
        E = set_from_domain_signs(g, signs)
        out["H"] = h_functional(E, g, cfg.s)
        target = "full" if args.per_domain is None else parse_region(args.per_domain)
        out["Per_s"] = frac_perimeter(E, target, cfg.s)
        u = PhaseField.from_set(E, g)
    else:
        values = parse_field(args.field, cfg.n)(grid.centers[grid.omega_index])
        u = PhaseField(grid, values, g)
    if args.eps is not None:
        out["F_eps"] = f_eps(u, args.eps, cfg.s, DoubleWell.from_expression(cfg.W)).to_dict()
        out["total"] = out["F_eps"]["total"]
    _emit(out)
    return EXIT_OK


def cmd_minimize(args) -> int:
    cfg = _load_config(args)
    g, E, m1, rep, selection = sharp_minimizer(cfg, cfg.base_h)
    out = {"m_1": m1, "sharp": rep.to_dict(), "selection": selection}
    if args.mode == "feps":
        if args.eps is None:
            raise ConfigError("--mode feps needs --eps")
        opts = DescentOptions(tol=cfg.tol, max_iter=cfg.max_iter)
        res = minimize_feps(args.eps, cfg.s, PhaseField.from_set(E, g), DoubleWell.from_expression(cfg.W), opts)
        out["feps"] = res.to_dict()
        out["m_eps_over_eps"] = res.objective / args.eps
        if args.trace:
            write_trace(args.trace, res.history)
    _emit(out)
    return EXIT_OK


def cmd_construct(args) -> int:
    cfg = _load_config(args)
    eps = args.eps if args.eps is not None else cfg.eps_list[0]
    g, E, m1, _, _ = sharp_minimizer(cfg, cfg.base_h)
    b = resolve_b(cfg, g)
    if args.single:
        case = case_config(cfg, b)
        const = construction_constants(case, cfg.n, cfg.s)
        _, delta = schedule_delta(eps, cfg.s, const["varsigma"], const["omega_continuum"], cfg.delta_cap)
        fine = make_datum(cfg, make_grid(cfg, delta / cfg.h_ratio))
        u_bar = transfer_field(E, fine)
        sgn = 1.0 if cfg.side == "lower" else -1.0
        level = SetRegion(fine.grid, sgn * u_bar.full() >= -1 + b - 1e-12, FAR_EMPTY, check=False)
        pair = clean_balls(level, cfg.x0_point(), delta, cfg.c)
        spec = LiftSpec(pair.p, cfg.c * delta, const["theta"], q=pair.q, delta=delta, side=cfg.side)
        _, drop, cells = lift_ball(u_bar, spec, b, cfg.s)
        bound = -const["varsigma"] * delta ** (cfg.n - 2 * cfg.s)
        _emit({"eps": eps, "delta": delta, "lift": spec.to_dict(), "drop": drop, "bound": bound,
               "cells": len(cells), "within_bound": drop <= bound})
        return EXIT_OK
    record, trace = eps_point(cfg, float(eps), E.signed()[E.grid.omega_index], m1, b)
    if args.trace:
        Path(args.trace).write_text(json.dumps(trace, indent=2, sort_keys=True, default=_json_default) + "\n")
    _emit({"m_1": m1, "record": record})
    return EXIT_OK


def cmd_sweep(args) -> int:
    cfg = _load_config(args)
    try:
        report = run(cfg)
    except StageError as exc:
        print(f"incomplete run: {exc}", file=sys.stderr)
        return EXIT_VALIDATION if isinstance(exc.cause, VALIDATION_ERRORS) else EXIT_NUMERICAL
    fit = report["fit"]
    print(f"m_1 = {report['m_1']:.10g}")
    for r in report["records"]:
        print(f"eps={r['eps']:.6g} delta={r['delta']:.6g} gap={r['gap']:.6e} ratio_mu={r['ratio_mu']:.6e}"
              f" {'pass' if r['pass'] else 'FAIL'}")
    print(f"slope = {fit['slope']:.6f} (target {fit['target_slope']:.6f})")
    print(f"mu-divergence: {'pass' if report['divergence']['pass'] else 'FAIL'} (mu={report['divergence']['mu']:.4g})")
    if report.get("almost_min") is not None:
        am = report["almost_min"]
        print(f"almost-min: {'pass' if am['pass'] else 'FAIL'} (worst margin {am['worst_margin']:.3e})")
    print(f"report: {Path(cfg.out) / 'report.json'}")
    return EXIT_OK


def cmd_verify(args) -> int:
    cfg = _load_config(args)
    out: dict = {}
    if args.csv:
        rows = read_csv(args.csv)
        if not rows:
            raise ConfigError(f"{args.csv} has no rows")
        s = rows[0]["s"]
        sweep = [(r["eps"], r["gap"]) for r in rows]
        fit = fit_scaling(sweep)
        verdict = check_mu_divergence(sweep, 1 - 2 * s + cfg.mu_offset, s, tail=min(cfg.mu_tail, len(rows)))
        out["fit"] = fit.to_dict()
        out["divergence"] = verdict.to_dict()
    if args.check_almost_min:
        _, E, _, _, _ = sharp_minimizer(cfg, cfg.almost_min_h)
        rep = check_almost_min(E, parse_region(cfg.omega_prime), cfg.s, flip_budget=cfg.flip_budget,
                               rho=cfg.rho_verify, tol=cfg.margin_tol)
        out["almost_min"] = rep.to_dict()
    if args.check_ladder:
        g = make_datum(cfg, make_grid(cfg, cfg.base_h))
        out["ladder"] = check_trivial_ladder(g, cfg.s, J_max=cfg.J_max).to_dict()
    if not out:
        raise ConfigError("verify needs at least one of --csv, --check-almost-min, --check-ladder")
    _emit(out)
    ok = all(v.get("pass", True) for k, v in out.items() if k != "fit")
    return EXIT_OK if ok else EXIT_NUMERICAL


def cmd_coeffs(args) -> int:
    cfg = _load_config(args)
    tab = get_table(cfg.n, cfg.s, args.max_offset, cache_dir=args.cache_dir)
    out: dict = {"n": tab.n, "s": tab.s, "max_offset": tab.max_offset, "h_exponent": tab.h_exponent}
    if args.cache_dir:
        out["cache"] = str(cache_path(args.cache_dir, cfg.n, cfg.s, tab.max_offset))
    offsets = [tuple(int(v) for v in o.split(",")) for o in args.offset] or (
        [(1,), (2,), (3,)] if cfg.n == 1 else [(1, 0), (1, 1), (2, 1)]
    )
    entries = []
    for off in offsets:
        if len(off) != cfg.n:
            raise ConfigError(f"offset {off} must have {cfg.n} components")
        val = float(tab.lookup(np.array(off)))
        item = {"offset": list(off), "value": val}
        if args.oracle:
            A = [(0.0, 1.0)] * cfg.n
            B = [(float(k), float(k) + 1.0) for k in off]
            ref = adaptive_pair_integral(A, B, cfg.s, tol=1e-10)
            item["oracle"] = ref
            item["rel_error"] = abs(val - ref) / abs(ref)
        entries.append(item)
    out["entries"] = entries
    _emit(out)
    return EXIT_OK


# ---------------------------------------------------------------------------
# Entry point
# ---------------------------------------------------------------------------

def build_parser() -> argparse.ArgumentParser:
    parser = argparse.ArgumentParser(prog="fracgap", description="Numerical lab for nonlocal phase-transition energies.")
    sub = parser.add_subparsers(dest="command", required=True)

    p = sub.add_parser("energy", help="evaluate F_eps, H or Per_s for a field or set")
    _add_config_flags(p)
    src = p.add_mutually_exclusive_group()
    src.add_argument("--field", default="sign(x)", help="phase field on the domain as an expression")
    src.add_argument("--set", help="set inside the domain as a region expression (reports H and Per_s)")
    p.add_argument("--eps", type=_number_arg, help="evaluate F_eps at this eps")
    p.add_argument("--per-domain", help="region for Per_s (default: the whole space)")
    p.set_defaults(func=cmd_energy)

    p = sub.add_parser("minimize", help="sharp-interface or phase-field minimization")
    _add_config_flags(p)
    p.add_argument("--mode", choices=("sharp", "feps"), default="sharp")
    p.add_argument("--eps", type=_number_arg, help="eps for --mode feps")
    p.add_argument("--trace", help="CSV path for the descent history")
    p.set_defaults(func=cmd_minimize)

    p = sub.add_parser("construct", help="one lift or the full v_eps at one eps")
    _add_config_flags(p)
    p.add_argument("--eps", type=_number_arg, help="eps (default: first entry of eps_list)")
    p.add_argument("--single", action="store_true", help="apply a single lift next to x0")
    p.add_argument("--trace", help="write the construction trace JSON here")
    p.set_defaults(func=cmd_construct)

    p = sub.add_parser("sweep", help="full pipeline over eps_list")
    _add_config_flags(p)
    p.set_defaults(func=cmd_sweep)

    p = sub.add_parser("verify", help="re-check stored data or run the verification checks")
    _add_config_flags(p)
    p.add_argument("--csv", help="sweep CSV to re-fit")
    p.add_argument("--check-almost-min", action="store_true", help="run the almost-minimality check")
    p.add_argument("--check-ladder", action="store_true", help="run the trivial-ladder check on the configured g")
    p.set_defaults(func=cmd_verify)

    p = sub.add_parser("coeffs", help="build or inspect the coefficient cache")
    _add_config_flags(p)
    p.add_argument("--max-offset", type=int, default=16)
    p.add_argument("--cache-dir", help="directory of the binary cache")
    p.add_argument("--offset", action="append", default=[], help="offset to print, e.g. 1,0 (repeatable)")
    p.add_argument("--oracle", action="store_true", help="compare against adaptive quadrature")
    p.set_defaults(func=cmd_coeffs)
    return parser


def main(argv=None) -> int:
    parser = build_parser()
    args = parser.parse_args(argv)
    try:
        return args.func(args)
    except VALIDATION_ERRORS as exc:
        print(f"validation error: {exc}", file=sys.stderr)
        return EXIT_VALIDATION
    except NUMERICAL_ERRORS as exc:
        print(f"numerical failure: {type(exc).__name__}: {exc}", file=sys.stderr)
        return EXIT_NUMERICAL


if __name__ == "__main__":
    sys.exit(main())
