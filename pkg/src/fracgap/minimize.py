"""Minimization of the sharp-interface energy and of the phase-field energy."""

from __future__ import annotations

import csv
import itertools
import math
import time
from dataclasses import dataclass, field
from pathlib import Path

import numpy as np

from .energy import (
    DoubleWell,
    ExteriorDatum,
    PhaseField,
    QuadraticForm,
    assemble_form,
    f_eps,
    phase_form,
)
from .geometry import FAR_EMPTY, FAR_FULL, SetRegion
from .quadrature import check_s
from .regions import HalfSpace


class EnumerationTooLarge(ValueError):
    pass


@dataclass
class SharpConfig:
    """A ±1 field on the domain: value ``sign`` on the first domain cell,
    flipping after each domain-cell position listed in ``jumps``."""

    sign: int
    jumps: tuple[int, ...]
    E: SetRegion

    def sort_key(self):
        return (self.jumps, self.sign)

    def to_dict(self) -> dict:
        g = self.E.grid
        edges = g.edges() if g.dim == 1 else None
        out = {"sign": self.sign, "jumps": list(self.jumps)}
        if edges is not None:
            om = g.omega_index
            out["jump_positions"] = [float(edges[om[j] + 1]) for j in self.jumps]
        return out


@dataclass
class MinimizeReport:
    argmin: object
    objective: float
    iterations: int
    grad_norm: float | None
    wall_time: float
    converged: bool = True
    local: bool = False
    initial_objective: float | None = None
    history: list = field(default_factory=list)
    ties: list = field(default_factory=list)
    seed: int | None = None

    def to_dict(self) -> dict:
        arg = self.argmin.to_dict() if hasattr(self.argmin, "to_dict") else None
        return {
            "objective": self.objective,
            "initial_objective": self.initial_objective,
            "iterations": self.iterations,
            "grad_norm": self.grad_norm,
            "wall_time": self.wall_time,
            "converged": self.converged,
            "local": self.local,
            "argmin": arg,
            "n_ties": len(self.ties),
            "seed": self.seed,
        }


def set_from_domain_signs(g: ExteriorDatum, signs: np.ndarray) -> SetRegion:
    """SetRegion equal to ``{signs > 0}`` on the domain and ``{g > 0}`` elsewhere."""
    grid = g.grid
    ind = g.values > 0
    ind[grid.omega_index] = np.asarray(signs) > 0
    far = g.far
    if far.is_constant:
        ff = FAR_FULL if far.value > 0 else FAR_EMPTY
    elif far.value > 0 >= far.other:
        ff = HalfSpace(tuple(far.normal), far.offset)
    elif far.other > 0 >= far.value:
        ff = HalfSpace(tuple(-v for v in far.normal), -far.offset)
    else:
        ff = FAR_FULL if far.value > 0 else FAR_EMPTY
    return SetRegion(grid, ind, ff, check=False)


def _configs_count(N: int, J: int) -> int:
    return 2 * sum(math.comb(N - 1, j) for j in range(J + 1))


def _signs_for(N: int, sign: int, jumps: tuple[int, ...]) -> np.ndarray:
    u = np.full(N, float(sign))
    for j in jumps:
        u[j + 1 :] *= -1
    return u


def minimize_sharp(
    g: ExteriorDatum,
    s: float,
    J_max: int = 2,
    max_configs: int = 5_000_000,
    tie_rtol: float = 1e-9,
    seeds: int = 4,
    rng_seed: int = 0,
) -> tuple[SetRegion, float, MinimizeReport]:
    """Minimize the sharp-interface energy over ±1 fields on the domain.

    In 1D the search is exhaustive over fields with at most ``J_max`` sign
    changes between consecutive domain cells; every configuration within
    ``tie_rtol`` of the minimum is a tie, and the lexicographically smallest
    jump tuple (then the smaller starting sign) is returned.  All ties are
    listed in ``report.ties``.  In 2D a multi-start single-cell-flip local
    search is used and the report is flagged ``local``.
    """
    s = check_s(s)
    t0 = time.perf_counter()
    if g.grid.dim == 1:
        return _sharp_1d(g, s, J_max, max_configs, tie_rtol, t0)
    return _sharp_local(g, s, seeds, rng_seed, t0)


def _sharp_1d(g, s, J_max, max_configs, tie_rtol, t0):
    grid = g.grid
    N = grid.n_omega
    if J_max < 0 or J_max > 4:
        raise ValueError("J_max must be between 0 and 4 in 1D")
    total = _configs_count(N, J_max)
    if total > max_configs:
        raise EnumerationTooLarge(
            f"{total} configurations exceed max_configs={max_configs}; coarsen the grid or lower J_max"
        )
    form = phase_form(PhaseField.constant(g, 0.0), s)
    # prefix sums of W for O(1) block sums S(a:b, c:d)
    P = np.zeros((N + 1, N + 1))
    P[1:, 1:] = np.cumsum(np.cumsum(form.W, axis=0), axis=1)
    Bc = np.concatenate([[0.0], np.cumsum(form.beta)])
    const = 2.0 * float(np.sum(form.m + form.gamma_cross + form.gamma_tail))

    def block(a0, a1, b0, b1):
        return P[a1, b1] - P[a0, b1] - P[a1, b0] + P[a0, b0]

    energies = []
    keys = []
    for J in range(J_max + 1):
        if J == 0:
            combos = np.zeros((1, 0), dtype=np.int64)
        else:
            combos = np.array(list(itertools.combinations(range(N - 1), J)), dtype=np.int64).reshape(-1, J)
        bounds = np.concatenate(
            [np.zeros((len(combos), 1), np.int64), combos + 1, np.full((len(combos), 1), N, np.int64)], axis=1
        )
        interior = np.zeros(len(combos))
        for a in range(J + 1):
            for b in range(a + 1, J + 1, 2):  # opposite signs only
                interior += 8.0 * block(bounds[:, a], bounds[:, a + 1], bounds[:, b], bounds[:, b + 1])
        alt = np.zeros(len(combos))
        for a in range(J + 1):
            alt += (-1) ** a * (Bc[bounds[:, a + 1]] - Bc[bounds[:, a]])
        for sign in (-1, 1):
            energies.append(interior + const - 4.0 * sign * alt)
            keys.append((J, sign, combos))
    best = min(float(e.min()) for e in energies)
    tol = tie_rtol * max(1.0, abs(best))
    ties = []
    for e, (J, sign, combos) in zip(energies, keys):
        for r in np.flatnonzero(e <= best + tol):
            ties.append((tuple(int(v) for v in combos[r]), sign))
    ties.sort()
    jumps, sign = ties[0]
    u = _signs_for(N, sign, jumps)
    E = set_from_domain_signs(g, u)
    best_exact = form.energy(u)
    cfg = SharpConfig(sign, jumps, E)
    ties_cfg = [{"jumps": list(j), "sign": sg} for j, sg in ties]
    rep = MinimizeReport(
        argmin=cfg,
        objective=best_exact,
        iterations=total,
        grad_norm=None,
        wall_time=time.perf_counter() - t0,
        ties=ties_cfg,
    )
    return E, best_exact, rep


def _flip_descent(form: QuadraticForm, u: np.ndarray, max_flips: int = 10**6) -> tuple[np.ndarray, int]:
    u = u.copy()
    grad = form.gradient(u)
    diagA = 0.5 * form.hessian_diag()
    flips = 0
    while flips < max_flips:
        d = -2.0 * u
        delta = grad * d + diagA * d * d
        k = int(np.argmin(delta))
        if delta[k] >= -1e-13 * max(1.0, abs(form.energy(u))):
            break
        # gradient update: grad += 2 A e_k d_k
        col = -2.0 * form.W[:, k] * d[k]
        col[k] += 2.0 * (form.deg[k] + form.m[k]) * d[k]
        grad += 2.0 * col
        u[k] += d[k]
        flips += 1
    return u, flips


def _sharp_local(g, s, seeds, rng_seed, t0):
    grid = g.grid
    form = phase_form(PhaseField.constant(g, 0.0), s)
    N = grid.n_omega
    rng = np.random.default_rng(rng_seed)
    starts = [np.full(N, -1.0), np.full(N, 1.0)]
    # nearest-exterior sign as a geometric guess
    ext = grid.ext_index
    if len(ext):
        cen = grid.centers
        om = grid.omega_index
        guess = np.empty(N)
        for r0 in range(0, N, 512):
            d = np.linalg.norm(cen[om[r0 : r0 + 512], None, :] - cen[None, ext, :], axis=2)
            guess[r0 : r0 + 512] = np.where(g.values[ext[np.argmin(d, axis=1)]] > 0, 1.0, -1.0)
        starts.append(guess)
    for _ in range(seeds):
        starts.append(np.where(rng.random(N) < 0.5, -1.0, 1.0))
    best_u, best_e, total_flips = None, math.inf, 0
    for u0 in starts:
        u, fl = _flip_descent(form, u0)
        total_flips += fl
        e = form.energy(u)
        if e < best_e - 1e-12 * max(1.0, abs(e)):
            best_u, best_e = u, e
    E = set_from_domain_signs(g, best_u)
    rep = MinimizeReport(
        argmin=None,
        objective=best_e,
        iterations=total_flips,
        grad_norm=None,
        wall_time=time.perf_counter() - t0,
        local=True,
        seed=rng_seed,
    )
    return E, best_e, rep


def select_tie(report: MinimizeReport, g: ExteriorDatum, near: float) -> SetRegion:
    """Among 1D ties, the configuration with a jump closest to ``near``.

    Used when a construction needs an interior interface and the
    minimizing set is not unique.
    """
    grid = g.grid
    edges = grid.edges()
    om = grid.omega_index
    best, best_d = None, math.inf
    for t in report.ties:
        if not t["jumps"]:
            continue
        pos = np.array([edges[om[j] + 1] for j in t["jumps"]])
        d = float(np.min(np.abs(pos - near)))
        if d < best_d - 1e-12:
            best, best_d = t, d
    if best is None:
        raise ValueError("no tied minimizer has an interior jump")
    u = _signs_for(grid.n_omega, best["sign"], tuple(best["jumps"]))
    return set_from_domain_signs(g, u)


# ---------------------------------------------------------------------------
# Phase-field descent
# ---------------------------------------------------------------------------

def gradient(u: PhaseField, eps: float, s: float, W: DoubleWell | None = None) -> np.ndarray:
    """Exact gradient of ``eps*kinetic + eps^(1-2s)*potential`` in the domain values."""
    W = W or DoubleWell()
    form = phase_form(u, s)
    return eps * form.gradient(u.values) + eps ** (1 - 2 * s) * u.grid.cell_volume * W.derivative(u.values)


@dataclass
class DescentOptions:
    tol: float = 1e-8
    max_iter: int = 5000
    step0: float = 1.0
    backtrack: float = 0.5
    armijo: float = 1e-4
    precondition: bool = True
    trace_csv: str | None = None


def minimize_feps(eps: float, s: float, init: PhaseField, W: DoubleWell | None = None, opts: DescentOptions | None = None) -> MinimizeReport:
    """Projected gradient descent on the box ``[-1, 1]^N`` with Armijo backtracking.

    With ``precondition`` the search direction is scaled by the inverse
    diagonal of the Hessian of the quadratic part (a fixed diagonal metric;
    the projection stays coordinate-wise).  The stopping measure is the
    norm of the projected-gradient step ``u - clip(u - d)``.
    """
    if eps <= 0:
        raise ValueError("eps must be positive")
    s = check_s(s)
    W = W or DoubleWell()
    opts = opts or DescentOptions()
    t0 = time.perf_counter()
    form = phase_form(init, s)
    hvol = init.grid.cell_volume
    pot_w = eps ** (1 - 2 * s) * hvol

    def objective(v):
        return eps * form.energy(v) + pot_w * float(np.sum(W(v)))

    def grad(v):
        return eps * form.gradient(v) + pot_w * W.derivative(v)

    scale = 1.0 / (eps * form.hessian_diag()) if opts.precondition else np.ones(init.grid.n_omega)
    u = np.array(init.values, dtype=float)
    f = objective(u)
    f0 = f
    history = []
    it = 0
    pg = math.inf
    converged = False
    while True:
        gvec = grad(u)
        pg = float(np.linalg.norm(u - np.clip(u - scale * gvec, -1.0, 1.0)))
        history.append((it, f, pg, None))
        if pg <= opts.tol:
            converged = True
            break
        if it >= opts.max_iter:
            break
        t = opts.step0
        while True:
            cand = np.clip(u - t * scale * gvec, -1.0, 1.0)
            fc = objective(cand)
            if fc <= f + opts.armijo * float(gvec @ (cand - u)):
                break
            t *= opts.backtrack
            if t < 1e-20:
                cand, fc = u, f
                break
        if fc >= f and np.array_equal(cand, u):
            converged = pg <= opts.tol
            break
        u, f = cand, fc
        it += 1
        history[-1] = (history[-1][0], history[-1][1], history[-1][2], t)
    field_ = init.with_values(u)
    if opts.trace_csv:
        write_trace(opts.trace_csv, history)
    return MinimizeReport(
        argmin=field_,
        objective=f,
        iterations=it,
        grad_norm=pg,
        wall_time=time.perf_counter() - t0,
        converged=converged,
        initial_objective=f0,
        history=history,
    )


def write_trace(path, history) -> Path:
    path = Path(path)
    path.parent.mkdir(parents=True, exist_ok=True)
    with open(path, "w", newline="") as fh:
        w = csv.writer(fh)
        w.writerow(["iteration", "objective", "grad_norm", "step"])
        for it, f, g, t in history:
            w.writerow([it, repr(float(f)), repr(float(g)), "" if t is None else repr(float(t))])
    return path


def m_eps_check(g: ExteriorDatum, eps: float, s: float, W: DoubleWell | None = None, J_max: int = 2, opts=None) -> dict:
    """Discrete first-order consistency: ``m_eps / eps`` against ``m_1``."""
    E, m1, rep = minimize_sharp(g, s, J_max=J_max)
    init = PhaseField.from_set(E, g)
    res = minimize_feps(eps, s, init, W, opts)
    ratio = res.objective / eps
    return {
        "m_1": m1,
        "m_eps": res.objective,
        "m_eps_over_eps": ratio,
        "rel_diff": abs(ratio - m1) / abs(m1) if m1 else abs(ratio),
        "converged": res.converged,
        "iterations": res.iterations,
        "f_eps_sharp": f_eps(init, eps, s, W).total,
    }
