"""End-to-end ε sweep: sharp minimizer, almost-minimality, v_ε, ladder, fits.

Outputs in the run directory:

``report.json``
    the run report (``schema_version`` 1): config echo, m_1, minimizer
    summary, almost-minimality report, per-ε records, fit and verdict,
    stage timings, and a ``complete`` flag.
``sweep.csv``
    one row per ε with columns ``CSV_COLUMNS``.
``traces/eps_<k>.json``
    the construction trace of each ε point.
``gap.svg``
    log-log plot of ``|gap|`` against ε with the fitted line.
"""

from __future__ import annotations

import csv
import json
import math
import time
from concurrent.futures import ProcessPoolExecutor
from pathlib import Path

import numpy as np

from .config import ConfigError, RunConfig, validate
from .construct import CaseConfig, build_v_eps, construction_constants, schedule_delta
from .energy import DoubleWell, ExteriorDatum, PhaseField, ResourceError, _locate, f_eps, kinetic
from .geometry import FarField, Grid, LipschitzGraph, SetRegion, build_grid
from .minimize import MinimizeReport, minimize_sharp, select_tie, set_from_domain_signs
from .regions import parse_field, parse_region
from .verify import check_almost_min, check_mu_divergence, fit_scaling

SCHEMA_VERSION = 1
CSV_COLUMNS = ("s", "eps", "delta", "N_delta", "gap", "ratio_mu", "pass")


class StageError(RuntimeError):
    """A pipeline stage failed; ``report`` holds the partial run report."""

    def __init__(self, stage: str, cause: BaseException, report: dict | None = None):
        super().__init__(f"stage {stage!r} failed: {type(cause).__name__}: {cause}")
        self.stage = stage
        self.cause = cause
        self.report = report


# ---------------------------------------------------------------------------
# Building the problem from a config
# ---------------------------------------------------------------------------

def far_field(cfg: RunConfig) -> FarField:
    normal = cfg.far_normal()
    if normal is None:
        return FarField(cfg.g_far)
    return FarField(cfg.g_far, cfg.g_far_other, normal, cfg.g_far_offset)


def make_grid(cfg: RunConfig, h: float) -> Grid:
    """Grid over the config box with cell size at most ``h``."""
    res = [max(2, int(math.ceil((hi - lo) / h - 1e-9))) for lo, hi in cfg.box]
    total = int(np.prod(res))
    if total > cfg.max_cells:
        raise ResourceError(
            f"grid with h={h:.4g} needs {total} cells, above max_cells={cfg.max_cells}; "
            "raise max_cells, shrink the box, or drop the smallest eps values"
        )
    box = cfg.box[0] if cfg.n == 1 else cfg.box
    return build_grid(box, res, parse_region(cfg.omega), R=cfg.R)


def make_datum(cfg: RunConfig, grid: Grid) -> ExteriorDatum:
    return ExteriorDatum.sample(grid, parse_field(cfg.g, cfg.n), far_field(cfg))


def make_graph(cfg: RunConfig) -> LipschitzGraph:
    x0 = cfg.x0_point()
    if cfg.n == 1:
        return LipschitzGraph(x0, cfg.r, 0.0, min(cfg.rho, cfg.r / 2))
    psi_xy = parse_field(cfg.psi, 1)
    return LipschitzGraph(x0, cfg.r, cfg.L, cfg.rho, psi=lambda t: psi_xy(np.reshape(t, (-1, 1))), rotation=cfg.rotation)


def measured_b(cfg: RunConfig, g: ExteriorDatum) -> float:
    """Level b of the exterior data near x0: 1 + min of the lifted-side values above -1."""
    grid = g.grid
    sgn = 1.0 if cfg.side == "lower" else -1.0
    x0 = np.asarray(cfg.x0_point())
    near = np.linalg.norm(grid.centers - x0[None, :], axis=1) < cfg.r
    ext = near & ~grid.omega_flat
    vals = sgn * g.values[ext]
    vals = vals[vals > -1 + 1e-12]
    if vals.size == 0:
        raise ConfigError(f"no exterior data above the well value within r={cfg.r} of x0")
    return float(1 + vals.min())


def case_config(cfg: RunConfig, b: float | None) -> CaseConfig:
    return CaseConfig(
        case=cfg.case,
        graph=make_graph(cfg),
        c=cfg.c,
        b=b,
        theta=cfg.theta,
        delta_cap=cfg.delta_cap,
        W=DoubleWell.from_expression(cfg.W),
        side=cfg.side,
    )


def resolve_b(cfg: RunConfig, g: ExteriorDatum) -> float:
    if cfg.b is not None:
        return float(cfg.b)
    return 2.0 if cfg.case == "interior" else measured_b(cfg, g)


# ---------------------------------------------------------------------------
# Sharp minimizer
# ---------------------------------------------------------------------------

def sharp_minimizer(cfg: RunConfig, h: float) -> tuple[ExteriorDatum, SetRegion, float, MinimizeReport, dict]:
    """Sharp minimizer on a grid of cell size ``h``, with the tie rule applied.

    For a 1D interior construction with tied minimizers the one with a jump
    closest to ``tie_near`` (default x0) is selected.
    """
    grid = make_grid(cfg, h)
    g = make_datum(cfg, grid)
    E, m1, rep = minimize_sharp(
        g, cfg.s, J_max=cfg.J_max, max_configs=cfg.max_configs, tie_rtol=cfg.tie_rtol,
        seeds=cfg.seeds, rng_seed=cfg.seed,
    )
    selection = {"rule": "lexicographic", "n_ties": len(rep.ties)}
    if cfg.n == 1 and cfg.case == "interior" and any(t["jumps"] for t in rep.ties):
        near = cfg.tie_near if cfg.tie_near is not None else cfg.x0_point()[0]
        E = select_tie(rep, g, near)
        selection = {"rule": "jump nearest", "near": near, "n_ties": len(rep.ties)}
    selection["interface"] = _interfaces_1d(E) if cfg.n == 1 else None
    return g, E, m1, rep, selection


def _interfaces_1d(E: SetRegion) -> list[float]:
    grid = E.grid
    u = E.signed()[grid.omega_index]
    edges = grid.edges()
    om = grid.omega_index
    return [float(edges[om[j] + 1]) for j in np.flatnonzero(np.diff(u) != 0)]


def transfer_field(E: SetRegion, g_fine: ExteriorDatum) -> PhaseField:
    """Phase field on a finer or coarser grid by cell-center lookup into ``E``."""
    src = E.grid
    grid = g_fine.grid
    pts = grid.centers[grid.omega_index]
    idx = _locate(src, pts)
    if np.any(idx < 0) or not np.all(src.omega_flat[idx]):
        raise ConfigError("the construction grid does not nest in the minimization grid")
    return PhaseField(grid, E.signed()[idx], g_fine)


# ---------------------------------------------------------------------------
# One ε point
# ---------------------------------------------------------------------------

def eps_point(cfg: RunConfig, eps: float, base_values: np.ndarray, m1: float, b: float) -> tuple[dict, dict]:
    """Construct v_ε and evaluate the gap; returns ``(record, trace_dict)``.

    ``base_values`` are the ±1 domain values of the sharp minimizer on the
    base grid.  The gap is ``F_ε(v_ε)/ε - H(ū)`` with ``H(ū)`` evaluated on
    the construction grid; ``gap_vs_base`` uses ``m1`` from the base grid.
    """
    base_grid = make_grid(cfg, cfg.base_h)
    base_g = make_datum(cfg, base_grid)
    E = set_from_domain_signs(base_g, base_values)
    case = case_config(cfg, b)
    const = construction_constants(case, cfg.n, cfg.s)
    dstar_c, d_used = schedule_delta(eps, cfg.s, const["varsigma"], const["omega_continuum"], cfg.delta_cap)
    h = d_used / cfg.h_ratio
    grid = make_grid(cfg, h)
    g = make_datum(cfg, grid)
    u_bar = transfer_field(E, g)
    W = case.W
    v, trace = build_v_eps(u_bar, eps, cfg.s, case)
    h_bar = kinetic(u_bar, cfg.s)
    F = f_eps(v, eps, cfg.s, W)
    F1 = F.total / eps
    # m_1 on the construction grid: the energy of the transferred minimizer,
    # so both sides of the gap carry the same discretization
    gap = F1 - h_bar
    ladder_vals = {"1": F1, "2": gap / eps}
    drop_identity = (F.kinetic - h_bar) - trace.total_drop
    mu = cfg.mu()
    sound = all(d <= bd for d, bd in zip(trace.drops, trace.bounds))
    record = {
        "s": cfg.s,
        "eps": eps,
        "delta": trace.delta,
        "delta_star": trace.delta_star,
        "delta_star_continuum": dstar_c,
        "h": grid.h,
        "cells": grid.size,
        "N_delta": trace.N_delta,
        "gap": gap,
        "gap_vs_base": F1 - m1,
        "ratio_mu": gap / eps**mu,
        "ladder": {k: ladder_vals[k] for k in list(ladder_vals)[: cfg.ladder_k]},
        "H_ubar_grid": h_bar,
        "m1_grid_offset": h_bar - m1,
        "kinetic_drop": trace.total_drop,
        "potential_term": eps ** (-2 * cfg.s) * F.potential,
        "drop_identity_error": drop_identity,
        "drops_within_bounds": sound,
        "pass": bool(gap < 0 and sound),
        "energy": F.to_dict(),
    }
    return record, trace.to_dict()


def _eps_point_star(args):
    return eps_point(*args)


# ---------------------------------------------------------------------------
# Run
# ---------------------------------------------------------------------------

def _trace_name(k: int) -> str:
    return f"traces/eps_{k:02d}.json"


def _write_json(path: Path, data) -> None:
    path.parent.mkdir(parents=True, exist_ok=True)
    path.write_text(json.dumps(data, indent=2, sort_keys=True, default=_json_default) + "\n")


def _json_default(obj):
    if isinstance(obj, np.generic):
        return obj.item()
    if isinstance(obj, np.ndarray):
        return obj.tolist()
    raise TypeError(f"cannot serialize {type(obj).__name__}")


def write_csv(path: Path, records: list[dict]) -> None:
    with open(path, "w", newline="") as fh:
        w = csv.writer(fh, lineterminator="\n")
        w.writerow(CSV_COLUMNS)
        for r in records:
            w.writerow([repr(float(r["s"])), repr(float(r["eps"])), repr(float(r["delta"])), int(r["N_delta"]),
                        repr(float(r["gap"])), repr(float(r["ratio_mu"])), "true" if r["pass"] else "false"])


def read_csv(path) -> list[dict]:
    """Rows of a sweep CSV as typed dicts."""
    with open(path, newline="") as fh:
        rows = list(csv.DictReader(fh))
    if not rows or tuple(rows[0].keys()) != CSV_COLUMNS:
        raise ValueError(f"{path} is not a sweep CSV (expected columns {', '.join(CSV_COLUMNS)})")
    return [
        {"s": float(r["s"]), "eps": float(r["eps"]), "delta": float(r["delta"]), "N_delta": int(r["N_delta"]),
         "gap": float(r["gap"]), "ratio_mu": float(r["ratio_mu"]), "pass": r["pass"] == "true"}
        for r in rows
    ]


def write_plot(path: Path, records: list[dict], fit: dict | None, s: float) -> None:
    """Deterministic log-log SVG of |gap| against ε."""
    import matplotlib

    matplotlib.use("Agg")
    import matplotlib.pyplot as plt

    eps = np.array([r["eps"] for r in records])
    gap = np.abs([r["gap"] for r in records])
    with plt.rc_context({"svg.hashsalt": "fracgap", "svg.fonttype": "none"}):
        fig, ax = plt.subplots(figsize=(5, 4))
        ax.loglog(eps, gap, "o", label="|gap|")
        if fit is not None:
            xs = np.array([eps.min(), eps.max()])
            ax.loglog(xs, np.exp(fit["intercept"]) * xs ** fit["slope"], "-",
                      label=f"fit slope {fit['slope']:.3f}")
            ax.loglog(xs, gap[0] * (xs / eps[0]) ** (1 - 2 * s), ":", label=f"reference slope {1 - 2 * s:.2f}")
        ax.set_xlabel("eps")
        ax.set_ylabel("|F1(v_eps) - m_1|")
        ax.set_title(f"s = {s:g}")
        ax.legend()
        fig.tight_layout()
        fig.savefig(path, format="svg", metadata={"Date": None})
        plt.close(fig)


def run(cfg: RunConfig, out: str | Path | None = None, write: bool = True) -> dict:
    """Execute the full pipeline and return the run report.

    Stages: ``minimize_sharp``, ``check_almost_min``, ``build_v_eps`` (per
    ε, in a worker pool when ``workers > 1``), ``fit_scaling`` and
    ``check_mu_divergence``.  A failing stage raises :class:`StageError`
    after the partial report (``complete: false``) has been written.
    """
    validate(cfg)
    out = Path(cfg.out if out is None else out)
    report: dict = {
        "schema_version": SCHEMA_VERSION,
        "complete": False,
        "failed_stage": None,
        "error": None,
        "config": cfg.to_dict(),
        "timing": {},
        "records": [],
    }

    def stage(name, fn):
        t0 = time.perf_counter()
        try:
            return fn()
        except Exception as exc:
            report["failed_stage"] = name
            report["error"] = f"{type(exc).__name__}: {exc}"
            if write:
                _write_json(out / "report.json", report)
            raise StageError(name, exc, report) from exc
        finally:
            report["timing"][name] = time.perf_counter() - t0

    g, E, m1, rep, selection = stage("minimize_sharp", lambda: sharp_minimizer(cfg, cfg.base_h))
    report["m_1"] = m1
    report["minimizer"] = {**rep.to_dict(), "selection": selection, "E_cells": int(E.flat[E.grid.omega_index].sum())}

    if cfg.almost_min:
        def almost_min():
            _, E_v, _, _, _ = sharp_minimizer(cfg, cfg.almost_min_h)
            return check_almost_min(E_v, parse_region(cfg.omega_prime), cfg.s, flip_budget=cfg.flip_budget,
                                    rho=cfg.rho_verify, tol=cfg.margin_tol)

        report["almost_min"] = stage("check_almost_min", almost_min).to_dict()
    else:
        report["almost_min"] = None

    b = stage("resolve_b", lambda: resolve_b(cfg, g))
    base_values = E.signed()[E.grid.omega_index]
    jobs = [(cfg, float(e), base_values, m1, b) for e in cfg.eps_list]

    def construct_all():
        if cfg.workers > 1 and len(jobs) > 1:
            with ProcessPoolExecutor(max_workers=cfg.workers) as pool:
                results = list(pool.map(_eps_point_star, jobs))
        else:
            results = [eps_point(*j) for j in jobs]
        return sorted(results, key=lambda rt: -rt[0]["eps"])

    results = stage("build_v_eps", construct_all)
    records = []
    for k, (rec, tr) in enumerate(results):
        rec["trace_file"] = _trace_name(k)
        if write:
            _write_json(out / rec["trace_file"], {"eps": rec["eps"], "s": cfg.s, **tr})
        records.append(rec)
    report["records"] = records

    sweep = [(r["eps"], r["gap"]) for r in records]
    fit = stage("fit_scaling", lambda: fit_scaling(sweep))
    report["fit"] = fit.to_dict()
    report["fit"]["target_slope"] = 1 - 2 * cfg.s
    tail = min(cfg.mu_tail, len(records))
    verdict = stage("check_mu_divergence", lambda: check_mu_divergence(sweep, cfg.mu(), cfg.s, tail=tail))
    report["divergence"] = verdict.to_dict()
    report["complete"] = True
    if write:
        out.mkdir(parents=True, exist_ok=True)
        write_csv(out / "sweep.csv", records)
        if cfg.plots:
            stage("plot", lambda: write_plot(out / "gap.svg", records, report["fit"], cfg.s))
        _write_json(out / "report.json", report)
    return report
