"""Competitor constructions: ball lifts, the δ schedule and the sequence v_ε.

A lift replaces the value -1 by -1+θ on a small discrete ball next to a
region where the field is at least -1+b.  The kinetic change of a lift is
evaluated through the exact identity

    drop = 2θ Σ_{y ∉ B} K(B, y) (θ - 2 - 2u(y)),

with ``K(B, y)`` the kernel mass between the ball and the cell / run ``y``.
"""

from __future__ import annotations

import math
from dataclasses import dataclass, field
from typing import Sequence

import numpy as np

from .energy import (
    DoubleWell,
    ExteriorDatum,
    PhaseField,
    _far_pieces_1d,
    assemble_form,
    potential,
)
from .geometry import (
    FAR_EMPTY,
    CleanBallPair,
    CoveringResult,
    LipschitzGraph,
    NotClean,
    SetRegion,
    clean_balls,
    cover_boundary,
    discrete_ball,
)
from .quadrature import check_s, interaction_1d, unit_ball_perimeter, unit_ball_volume


class HypothesisViolated(ValueError):
    def __init__(self, clause: str, detail: str = ""):
        super().__init__(f"lift hypothesis violated: {clause}" + (f" ({detail})" if detail else ""))
        self.clause = clause


class ResolutionError(ValueError):
    pass


# ---------------------------------------------------------------------------
# Constants
# ---------------------------------------------------------------------------

def lift_constants(c: float, n: int, s: float) -> tuple[float, float]:
    """(C0, C1): the perimeter and the near-pair constants of the lift estimate."""
    s = check_s(s)
    C0 = c ** (n - 2 * s) * unit_ball_perimeter(n, s)
    C1 = unit_ball_volume(n) ** 2 * 2.0 ** (-n - 2 * s)
    return C0, C1


def theta_star(b: float, c: float, n: int, s: float) -> float:
    """Admissible lift level θ = 2 C1 b c^{2n} / (2 C0 + C1 c^{2n})."""
    if b <= 0:
        raise ValueError("b must be positive")
    if not 0 < c < 0.5:
        raise ValueError("c must lie in (0, 1/2)")
    C0, C1 = lift_constants(c, n, s)
    c2n = c ** (2 * n)
    return 2 * C1 * b * c2n / (2 * C0 + C1 * c2n)


def varsigma(theta: float, b: float, c: float, n: int, s: float) -> float:
    """Guaranteed drop coefficient ς = θ C1 c^{2n} (2b - θ)."""
    _, C1 = lift_constants(c, n, s)
    return theta * C1 * c ** (2 * n) * (2 * b - theta)


def delta_star(eps: float, s: float, sigma: float, omega: float) -> float:
    """Minimizer of δ ↦ -ς δ^{1-2s} + ω δ / ε^{2s}."""
    if min(eps, sigma, omega) <= 0:
        raise ValueError("eps, sigma and omega must be positive")
    s = check_s(s)
    return ((1 - 2 * s) * sigma / omega) ** (1 / (2 * s)) * eps


def delta_objective(delta, eps: float, s: float, sigma: float, omega: float):
    return -sigma * np.asarray(delta) ** (1 - 2 * s) + omega * np.asarray(delta) / eps ** (2 * s)


def delta_star_value(eps: float, s: float, sigma: float, omega: float) -> float:
    """The minimum value -2s((1-2s)/ω)^{(1-2s)/(2s)} ς^{1/(2s)} ε^{1-2s}."""
    s = check_s(s)
    return -2 * s * ((1 - 2 * s) / omega) ** ((1 - 2 * s) / (2 * s)) * sigma ** (1 / (2 * s)) * eps ** (1 - 2 * s)


# ---------------------------------------------------------------------------
# Single lift
# ---------------------------------------------------------------------------

@dataclass
class LiftSpec:
    center: np.ndarray
    radius: float
    theta: float
    q: np.ndarray | None = None
    delta: float | None = None
    side: str = "lower"

    def to_dict(self) -> dict:
        return {
            "center": np.asarray(self.center).tolist(),
            "radius": self.radius,
            "theta": self.theta,
            "q": None if self.q is None else np.asarray(self.q).tolist(),
            "delta": self.delta,
            "side": self.side,
        }


def _lift_drop_1d(field_full: np.ndarray, grid, far, cells: np.ndarray, theta: float, s: float) -> float:
    """Exact drop identity in 1D via run sums (the ball is a contiguous block of -1 cells)."""
    edges = grid.edges()
    if np.any(np.diff(np.sort(cells)) != 1):
        raise ValueError("1D ball must be a contiguous set of cells")
    a, b = edges[cells.min()], edges[cells.max() + 1]
    v = np.array(field_full, dtype=float)
    mask = np.ones(grid.size, bool)
    mask[cells] = False
    # runs of the field outside the ball
    idx = np.flatnonzero(mask)
    change = np.flatnonzero((np.diff(v[idx]) != 0) | (np.diff(idx) != 1)) + 1
    st = np.concatenate([[0], change])
    en = np.concatenate([change, [len(idx)]])
    ra = edges[idx[st]]
    rb = edges[idx[en - 1] + 1]
    rv = v[idx[st]]
    pieces = _far_pieces_1d(grid, far)
    ra = np.concatenate([ra, [p[0] for p in pieces]])
    rb = np.concatenate([rb, [p[1] for p in pieces]])
    rv = np.concatenate([rv, [p[2] for p in pieces]])
    left = rb <= a
    w = np.empty(len(ra))
    w[left] = interaction_1d(-b, -a, -rb[left], -ra[left], s)
    w[~left] = interaction_1d(a, b, ra[~left], rb[~left], s)
    return float(2 * theta * np.sum(w * (theta - 2 - 2 * rv)))


def _lift_drop_form(u: PhaseField, cells_dom: np.ndarray, theta: float, s: float, side_sign: float) -> float:
    form = assemble_form(u.grid, u.exterior.values, u.grid.omega_flat, u.exterior.far, s)
    vals = side_sign * np.asarray(u.values)
    inB = np.zeros(len(vals), bool)
    inB[cells_dom] = True
    Wb = form.W[cells_dom][:, ~inB]
    inner = float(np.sum(Wb @ (theta - 2 - 2 * vals[~inB])))
    # exterior: Σ_x [(θ-2) m_x - 2 β_x], with β mirrored for upper lifts
    ext = float(np.sum((theta - 2) * form.m[cells_dom] - 2 * side_sign * form.beta[cells_dom]))
    return 2 * theta * (inner + ext)


def lift_ball(
    u_bar: PhaseField,
    spec: LiftSpec,
    b: float,
    s: float,
    method: str = "auto",
) -> tuple[PhaseField, float, np.ndarray]:
    """Apply one lift and return ``(field, kinetic_drop, ball_cells)``.

    The hypotheses are checked on the grid: the discrete ball lies in the
    domain, the field equals -1 there (+1 for ``side="upper"``), and the
    ball around ``spec.q`` (with ``|p - q| < δ``) carries values ``>= -1+b``
    (resp. ``<= 1-b``).
    """
    s = check_s(s)
    grid = u_bar.grid
    sgn = 1.0 if spec.side == "lower" else -1.0
    if spec.side not in ("lower", "upper"):
        raise ValueError("side must be 'lower' or 'upper'")
    if not 0 < spec.theta < b:
        raise HypothesisViolated("0 < theta < b", f"theta={spec.theta}, b={b}")
    cells = discrete_ball(grid, spec.center, spec.radius)
    if len(cells) == 0:
        raise HypothesisViolated("non-empty ball", "the discrete ball contains no cell")
    if not grid.omega_flat[cells].all():
        raise HypothesisViolated("ball inside the domain")
    full = u_bar.full()
    if np.any(sgn * full[cells] != -1.0):
        raise HypothesisViolated("field equals the well value on the ball")
    if spec.q is None:
        raise HypothesisViolated("a b-level ball near p", "no q center supplied")
    if spec.delta is not None and np.linalg.norm(np.asarray(spec.q) - np.asarray(spec.center)) >= spec.delta:
        raise HypothesisViolated("|p - q| < delta")
    qcells = discrete_ball(grid, spec.q, spec.radius)
    if len(qcells) == 0 or np.any(sgn * full[qcells] < -1 + b - 1e-12):
        raise HypothesisViolated("field >= -1+b on the ball around q")
    pos = np.searchsorted(grid.omega_index, cells)
    new_vals = np.array(u_bar.values)
    new_vals[pos] = sgn * (-1.0 + spec.theta)
    new = u_bar.with_values(new_vals)
    if method == "auto":
        method = "runs" if grid.dim == 1 else "form"
    if method == "runs":
        fld, far = (full, u_bar.exterior.far) if sgn > 0 else (-full, u_bar.exterior.far.negated())
        drop = _lift_drop_1d(fld, grid, far, cells, spec.theta, s)
    else:
        drop = _lift_drop_form(u_bar, pos, spec.theta, s, sgn)
    return new, drop, cells


# ---------------------------------------------------------------------------
# The sequence v_ε
# ---------------------------------------------------------------------------

@dataclass
class CaseConfig:
    """Settings for the construction of v_ε.

    ``case`` is ``"interior"`` (lifts next to an interface of the minimizer)
    or ``"boundary"`` (lifts inside the domain next to exterior data
    ``>= -1+b``).  ``graph`` describes the boundary piece to cover.
    """

    case: str = "interior"
    graph: LipschitzGraph | None = None
    c: float = 0.2
    b: float | None = None
    theta: float | None = None
    delta_cap: float = 4.0
    delta: float | None = None
    W: DoubleWell = field(default_factory=DoubleWell)
    side: str = "lower"

    def resolved_b(self) -> float:
        if self.b is not None:
            return float(self.b)
        return 2.0

    def to_dict(self) -> dict:
        g = self.graph
        return {
            "case": self.case,
            "graph": None if g is None else {"x0": list(g.x0), "r": g.r, "L": g.L, "rho": g.rho},
            "c": self.c,
            "b": self.b,
            "theta": self.theta,
            "delta_cap": self.delta_cap,
            "delta": self.delta,
            "W": self.W.expression,
            "side": self.side,
        }


@dataclass
class ConstructionTrace:
    specs: list[LiftSpec]
    drops: list[float]
    bounds: list[float]
    field: PhaseField | None
    delta: float
    delta_star: float
    theta: float
    b: float
    varsigma: float
    omega: float
    omega_continuum: float
    N_delta: int
    covering: CoveringResult | None = None
    potential_increase: float = 0.0
    ball_cells: list[int] = field(default_factory=list)

    @property
    def total_drop(self) -> float:
        return float(sum(self.drops))

    @property
    def achieved_kappa(self) -> float:
        """Per-site drop coefficient: -total_drop / (N δ^{n-2s})."""
        return -self.total_drop / (self.N_delta * self.delta ** self._n_minus_2s) if self.N_delta else 0.0

    _n_minus_2s: float = 0.0

    def steps(self) -> list[dict]:
        return [
            {**sp.to_dict(), "drop": d, "bound": bd, "cells": nc}
            for sp, d, bd, nc in zip(self.specs, self.drops, self.bounds, self.ball_cells)
        ]

    def to_dict(self) -> dict:
        return {
            "delta": self.delta,
            "delta_star": self.delta_star,
            "theta": self.theta,
            "b": self.b,
            "varsigma": self.varsigma,
            "omega": self.omega,
            "omega_continuum": self.omega_continuum,
            "N_delta": self.N_delta,
            "total_drop": self.total_drop,
            "potential_increase": self.potential_increase,
            "achieved_kappa": self.achieved_kappa,
            "steps": self.steps(),
        }


def schedule_delta(eps: float, s: float, sigma: float, omega: float, cap: float) -> tuple[float, float]:
    """(δ*, δ used): δ = λ ε with λ the largest power of two ≤ min(δ*/ε, cap)."""
    dstar = delta_star(eps, s, sigma, omega)
    lam = 2.0 ** math.floor(math.log2(min(dstar / eps, cap)))
    return dstar, lam * eps


def discrete_ball_volume(n: int, radius_in_cells: float) -> int:
    """Number of lattice cell centers within ``radius_in_cells`` of a cell center."""
    r = int(math.floor(radius_in_cells + 1e-9))
    k = np.arange(-r, r + 1)
    if n == 1:
        return int(np.count_nonzero(np.abs(k) <= radius_in_cells + 1e-9))
    K1, K2 = np.meshgrid(k, k, indexing="ij")
    return int(np.count_nonzero(K1**2 + K2**2 <= (radius_in_cells + 1e-9) ** 2))


def construction_constants(case: CaseConfig, n: int, s: float) -> dict:
    b = case.resolved_b()
    theta = case.theta if case.theta is not None else theta_star(b, case.c, n, s)
    sig = varsigma(theta, b, case.c, n, s)
    w_level = float(case.W(np.array([theta - 1.0]))[0])
    omega_cont = w_level * unit_ball_volume(n) * case.c**n
    return {"b": b, "theta": theta, "varsigma": sig, "omega_continuum": omega_cont, "W_level": w_level}


def build_v_eps(
    u_bar: PhaseField,
    eps: float,
    s: float,
    case: CaseConfig,
    E: SetRegion | None = None,
    delta: float | None = None,
) -> tuple[PhaseField, ConstructionTrace]:
    """Iterated lifting at every covering site of the boundary piece.

    ``E`` is the set whose clean balls are searched: by default
    ``{u_bar >= -1+b}`` over the whole box (domain values and exterior
    data).  ``delta`` overrides the schedule.
    """
    s = check_s(s)
    grid = u_bar.grid
    n = grid.dim
    if case.graph is None:
        raise ValueError("case.graph is required")
    const = construction_constants(case, n, s)
    b, theta, sig = const["b"], const["theta"], const["varsigma"]
    sgn = 1.0 if case.side == "lower" else -1.0
    full = u_bar.full()
    if E is None:
        ind = sgn * full >= -1 + b - 1e-12
        E = SetRegion(grid, ind, FAR_EMPTY, check=False)
    # ω from the discrete ball volume at the scheduled δ (self-similar in δ/h)
    dstar_c, d_used = schedule_delta(eps, s, sig, const["omega_continuum"], case.delta_cap)
    if delta is None:
        delta = case.delta if case.delta is not None else d_used
    if delta <= 4 * grid.h:
        raise ResolutionError(f"delta={delta:.4g} <= 4h={4 * grid.h:.4g}; refine the grid for eps={eps:g}")
    oc = grid.centers[grid.omega_index]
    diam = float(np.max(oc.max(axis=0) - oc.min(axis=0))) + grid.h
    if delta >= diam / 2:
        raise ResolutionError(f"delta={delta:.4g} is not small compared with the domain (diameter {diam:.4g})")
    radius = case.c * delta
    vol_disc = discrete_ball_volume(n, radius / grid.h) * grid.cell_volume
    omega = const["W_level"] * vol_disc / delta**n
    dstar = delta_star(eps, s, sig, omega)
    cov = cover_boundary(case.graph, delta)
    field_ = u_bar
    specs, drops, bounds, ncells = [], [], [], []
    pot0 = potential(u_bar, case.W)
    for x in cov.points:
        pair = clean_balls(E, x, delta, case.c)
        spec = LiftSpec(pair.p, radius, theta, q=pair.q, delta=delta, side=case.side)
        field_, drop, cells = lift_ball(field_, spec, b, s)
        specs.append(spec)
        drops.append(drop)
        bounds.append(-sig * delta ** (n - 2 * s))
        ncells.append(len(cells))
    trace = ConstructionTrace(
        specs=specs,
        drops=drops,
        bounds=bounds,
        field=field_,
        delta=delta,
        delta_star=dstar,
        theta=theta,
        b=b,
        varsigma=sig,
        omega=omega,
        omega_continuum=const["omega_continuum"],
        N_delta=cov.N_delta,
        covering=cov,
        potential_increase=potential(field_, case.W) - pot0,
        ball_cells=ncells,
    )
    trace._n_minus_2s = n - 2 * s
    return field_, trace


# ---------------------------------------------------------------------------
# Refined one-dimensional estimate
# ---------------------------------------------------------------------------

# Sharp constant of (1 + η)^{2s} <= 1 + C η on η >= 0 is C = 2s (concavity).
def eta_step_constant(s: float) -> float:
    return 2 * check_s(s)


def refined_constant(s: float) -> float:
    """Constant C of the bound, tracked through the estimate with the sharp η-step.

    The two outer tails contribute at most ``4 (2 + 1) θ δ / (s a^{2s})``
    (left tail ``2 δ / a^{2s}`` using ``a - δ + t >= (a + t)/2``, right tail
    ``δ / a^{2s}``, integrand bounded by 4); the near-right correction adds
    ``θ (2b - θ) δ / (s a^{2s})``.  Both fit under ``(12/s) θ (1 + b) δ / a^{2s}``.
    """
    return 12.0 / check_s(s)


def refined_1d_bound(a: float, b: float, delta: float, s: float, theta: float, C: float | None = None) -> float:
    """2θ(θ-b)δ^{1-2s}/(s(1-2s)) + C θ (1+b) δ / a^{2s}."""
    s = check_s(s)
    if not 0 < a <= 1:
        raise ValueError("a must lie in (0, 1]")
    if not 0 < delta < a / 2:
        raise ValueError("need 0 < delta < a/2")
    if not 0 < theta < min(b, 2.0):
        raise ValueError("need 0 < theta < min(b, 2)")
    if C is None:
        C = refined_constant(s)
    p = 1 - 2 * s
    return 2 * theta * (theta - b) * delta**p / (s * p) + C * theta * (1 + b) * delta / a ** (2 * s)


def refined_1d_leading(b: float, s: float, theta: float | None = None) -> float:
    theta = b / 2 if theta is None else theta
    return 2 * theta * (theta - b) / (s * (1 - 2 * s))


@dataclass
class StepFunction:
    """Piecewise-constant function on ℝ: ``values[k]`` on ``(breaks[k-1], breaks[k])``."""

    breaks: Sequence[float]
    values: Sequence[float]

    def __post_init__(self):
        self.breaks = np.asarray(self.breaks, dtype=float)
        self.values = np.asarray(self.values, dtype=float)
        if len(self.values) != len(self.breaks) + 1:
            raise ValueError("need len(values) == len(breaks) + 1")
        if np.any(np.diff(self.breaks) <= 0):
            raise ValueError("breaks must be increasing")

    def intervals(self):
        lo = np.concatenate([[-np.inf], self.breaks])
        hi = np.concatenate([self.breaks, [np.inf]])
        return lo, hi, self.values

    def __call__(self, x):
        return self.values[np.searchsorted(self.breaks, np.asarray(x, dtype=float), side="right")]


def interval_lift_drop(u_bar: StepFunction, p: float, delta: float, theta: float, s: float) -> float:
    """Exact kinetic change of setting ``u = -1 + θ`` on ``(p - δ, p)``.

    Requires ``u_bar = -1`` there and ``(p - δ, p) ⊂ (-1, 1)``; uses the
    identity ``2θ ∬ (θ - 2 - 2 ū(y)) K`` with closed-form interval masses.
    """
    s = check_s(s)
    A0, A1 = p - delta, p
    if A0 < -1 or A1 > 1:
        raise ValueError("(p - delta, p) must lie in (-1, 1)")
    if np.any(u_bar(np.linspace(A0, A1, 9)[1:-1]) != -1):
        raise ValueError("u_bar must equal -1 on (p - delta, p)")
    lo, hi, vals = u_bar.intervals()
    total = 0.0
    # clip every piece to the complement of (A0, A1)
    for a, b, v in zip(lo, hi, vals):
        for x0, x1 in ((a, min(b, A0)), (max(a, A1), b)):
            if x1 <= x0:
                continue
            if x1 <= A0:
                w = float(interaction_1d(-A1, -A0, -x1, -x0, s))
            else:
                w = float(interaction_1d(A0, A1, x0, x1, s))
            total += w * (theta - 2 - 2 * v)
    return 2 * theta * total
