"""Checks of the almost-minimality inequality, of scaling laws and of the ladder."""

from __future__ import annotations

import itertools
import math
from dataclasses import dataclass, field

import numpy as np

from .energy import (
    DoubleWell,
    ExteriorDatum,
    PhaseField,
    assemble_form,
    f_eps,
    ladder,
)
from .geometry import SetRegion
from .quadrature import check_s
from .regions import Region


class DomainError(ValueError):
    pass


# ---------------------------------------------------------------------------
# Scaling fits
# ---------------------------------------------------------------------------

@dataclass
class ScalingFit:
    slope: float
    intercept: float
    residual_sum: float
    eps: list[float]
    gaps: list[float]

    def to_dict(self) -> dict:
        return {
            "slope": self.slope,
            "intercept": self.intercept,
            "residual_sum": self.residual_sum,
            "points": [[e, g] for e, g in zip(self.eps, self.gaps)],
        }


def fit_scaling(sweep, min_points: int = 5, min_octaves: float = 3.0) -> ScalingFit:
    """Least-squares line through ``(log ε, log |gap|)``.

    ``sweep`` is a sequence of ``(eps, gap)`` pairs; every gap must be
    negative.
    """
    pts = sorted(((float(e), float(g)) for e, g in sweep), reverse=True)
    if len(pts) < min_points:
        raise ValueError(f"need at least {min_points} points, got {len(pts)}")
    eps = np.array([p[0] for p in pts])
    gaps = np.array([p[1] for p in pts])
    if np.any(gaps >= 0):
        raise ValueError("all gaps must be negative")
    if math.log2(eps.max() / eps.min()) < min_octaves - 1e-12:
        raise ValueError(f"eps values must span at least {min_octaves} octaves")
    x, y = np.log(eps), np.log(-gaps)
    (slope, intercept), res, *_ = np.polyfit(x, y, 1, full=True)
    rsum = float(res[0]) if len(res) else 0.0
    return ScalingFit(float(slope), float(intercept), rsum, eps.tolist(), gaps.tolist())


@dataclass
class DivergenceVerdict:
    passed: bool
    mu: float
    ratios: list[float]
    tail: int

    def to_dict(self) -> dict:
        return {"pass": self.passed, "mu": self.mu, "ratios": self.ratios, "tail": self.tail}


def check_mu_divergence(sweep, mu: float, s: float, tail: int | None = None) -> DivergenceVerdict:
    """Monotone growth of ``|gap_k| / ε_k^μ`` over the small-ε tail of the sweep.

    Points are ordered by decreasing ε.  ``tail`` counts points (default: the
    last ⌈n/2⌉); growth must be strict between consecutive tail points and
    every ratio must be negative.
    """
    s = check_s(s)
    if mu <= 1 - 2 * s:
        raise DomainError(f"mu={mu} must exceed 1-2s={1 - 2 * s}")
    pts = sorted(((float(e), float(g)) for e, g in sweep), reverse=True)
    eps = np.array([p[0] for p in pts])
    ratio = np.array([p[1] for p in pts]) / eps**mu
    k = math.ceil(len(pts) / 2) if tail is None else int(tail)
    k = max(2, min(k, len(pts)))
    t = ratio[-k:]
    ok = bool(np.all(ratio < 0) and np.all(np.diff(np.abs(t)) > 0))
    return DivergenceVerdict(ok, mu, ratio.tolist(), k)


# ---------------------------------------------------------------------------
# Almost minimality
# ---------------------------------------------------------------------------

@dataclass
class AlmostMinReport:
    Lambda: float
    n_competitors: int
    worst_margin: float
    worst_flip: list[int]  # flat grid indices of the flipped cells
    passed: bool
    rho: float
    tol: float = 1e-10

    def to_dict(self) -> dict:
        return {
            "Lambda": self.Lambda,
            "n_competitors": self.n_competitors,
            "worst_margin": self.worst_margin,
            "worst_flip": self.worst_flip,
            "pass": self.passed,
            "rho": self.rho,
            "tol": self.tol,
        }


def almost_min_constant(n: int, s: float) -> float:
    """C in Λ = C ρ^{-2s}: 6 |S^{n-1}| / (2s)."""
    s = check_s(s)
    sphere = {1: 2.0, 2: 2 * math.pi}[n]
    return 6 * sphere / (2 * s)


def _distance_to_boundary(grid, sub_mask: np.ndarray) -> float:
    """Distance between the sub-domain and the complement of the domain (cell centers)."""
    om = grid.omega_flat
    inner = grid.centers[sub_mask]
    outer = grid.centers[~om]
    if len(inner) == 0:
        raise DomainError("sub-domain is empty on the grid")
    best = math.inf
    for r0 in range(0, len(inner), 1024):
        d = np.linalg.norm(inner[r0 : r0 + 1024, None, :] - outer[None, :, :], axis=2)
        best = min(best, float(d.min()))
    return best - grid.h  # cell-center distance minus one cell width


def check_almost_min(
    E: SetRegion,
    omega_prime,
    s: float,
    flip_budget: int = 3,
    rho: float | None = None,
    Lambda: float | None = None,
    tol: float = 1e-10,
    chunk: int = 200_000,
) -> AlmostMinReport:
    """Exhaustive check of ``Per(E,Ω′) <= Per(F,Ω′) + Λ|EΔF|``.

    Competitors ``F`` coincide with ``E`` outside ``Ω′`` and differ on at most
    ``flip_budget`` cells inside it.  ``Λ = C ρ^{-2s}`` unless given; ``rho``
    is the distance from ``Ω′`` to the complement of the domain.  Perimeter
    differences are evaluated through the quadratic form of the kinetic
    energy on ``Ω′`` (one eighth of it in ±1 variables).
    """
    s = check_s(s)
    grid = E.grid
    if isinstance(omega_prime, Region):
        mask = grid.mask_of(omega_prime).reshape(-1)
    else:
        mask = np.asarray(omega_prime, dtype=bool).reshape(-1)
    if np.any(mask & ~grid.omega_flat):
        raise DomainError("the sub-domain must lie inside the domain")
    if rho is None:
        rho = _distance_to_boundary(grid, mask)
    if rho <= 0:
        raise DomainError(f"distance between the sub-domain and the boundary must be positive (rho={rho})")
    if Lambda is None:
        Lambda = almost_min_constant(grid.dim, s) * rho ** (-2 * s)
    u = E.signed()
    cell_ids = np.flatnonzero(mask)
    form = assemble_form(grid, u, mask, E.far, s)
    ud = u[mask]
    g = form.gradient(ud)
    A_diag = 0.5 * form.hessian_diag()
    N = len(ud)
    vol = grid.cell_volume
    # F = E is always a competitor (margin 0); the reported worst margin is
    # over the non-trivial competitors whenever there are any
    worst, worst_flip, count = (0.0 if flip_budget == 0 else -math.inf), [], 1
    for k in range(1, flip_budget + 1):
        combos_iter = itertools.combinations(range(N), k)
        while True:
            block = np.array(list(itertools.islice(combos_iter, chunk)), dtype=np.int64)
            if block.size == 0:
                break
            block = block.reshape(-1, k)
            d = -2.0 * ud[block]  # flips in ±1 variables
            delta = np.sum(g[block] * d, axis=1) + np.sum(A_diag[block] * d * d, axis=1)
            for a in range(k):
                for b in range(a + 1, k):
                    delta += -4.0 * form.W[block[:, a], block[:, b]] * d[:, a] * d[:, b]
            # Per(E) - Per(F) - Λ|EΔF| = -Δ/8 - Λ k h^n
            margin = -delta / 8.0 - Lambda * k * vol
            i = int(np.argmax(margin))
            if margin[i] > worst:
                worst, worst_flip = float(margin[i]), cell_ids[block[i]].tolist()
            count += len(block)
    return AlmostMinReport(float(Lambda), count, worst, worst_flip, worst <= tol, float(rho), tol)


# ---------------------------------------------------------------------------
# Trivial ladder
# ---------------------------------------------------------------------------

@dataclass
class LadderReport:
    m_1: float
    eps: list[float]
    k_values: list[int]
    minimizer_values: dict
    perturbed_values: list[float]
    minimizer_zero: bool
    perturbed_diverges: bool

    @property
    def passed(self) -> bool:
        return self.minimizer_zero and self.perturbed_diverges

    def to_dict(self) -> dict:
        return {
            "m_1": self.m_1,
            "eps": self.eps,
            "k_values": self.k_values,
            "minimizer_values": {str(k): v for k, v in self.minimizer_values.items()},
            "perturbed_F2": self.perturbed_values,
            "minimizer_zero": self.minimizer_zero,
            "perturbed_diverges": self.perturbed_diverges,
            "pass": self.passed,
        }


def check_trivial_ladder(
    g: ExteriorDatum,
    s: float,
    k_max: int = 5,
    eps_list=None,
    W: DoubleWell | None = None,
    J_max: int = 2,
    tol: float = 1e-10,
) -> LadderReport:
    """Ladder values when the first-order minimum vanishes.

    The minimizer's ladder values must be zero for ``k = 2..k_max`` and a
    field with one flipped domain cell must have a second-order value of
    growing magnitude along the (decreasing) ε sweep.
    """
    from .minimize import minimize_sharp

    s = check_s(s)
    E, m1, _ = minimize_sharp(g, s, J_max=J_max)
    if abs(m1) > tol:
        raise DomainError(f"first-order minimum m_1={m1:.3g} is not zero")
    eps_list = sorted([2.0**-k for k in range(4, 11)] if eps_list is None else eps_list, reverse=True)
    u = PhaseField.from_set(E, g)
    vals = {}
    for k in range(2, k_max + 1):
        vals[k] = [ladder(u, e, s, [0.0, 0.0] + [0.0] * (k - 2), k, W) for e in eps_list]
    zero = all(abs(v) <= tol for vs in vals.values() for v in vs)
    pert = np.array(u.values)
    mid = len(pert) // 2
    pert[mid] = -pert[mid]
    up = u.with_values(pert)
    f2 = [ladder(up, e, s, [0.0, 0.0], 2, W) for e in eps_list]
    grows = bool(np.all(np.diff(np.abs(f2)) > 0))
    return LadderReport(m1, eps_list, list(range(2, k_max + 1)), vals, f2, zero, grows)
