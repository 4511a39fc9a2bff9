"""Discrete nonlocal energies on piecewise-constant fields.

The kinetic energy of a field ``u`` with exterior datum ``g`` is the
kernel double integral of ``|u(x) - u(y)|^2`` over all pairs except the
exterior-exterior ones.  Two exact evaluation routes are provided:

* a dense quadratic form on the domain cells (any dimension supported by
  the coefficient tables), which also yields gradients and flip deltas;
* in 1D, a run-length evaluation over maximal constant intervals using
  closed-form interval interactions, cheap on fine grids.
"""

from __future__ import annotations

import math
import warnings
from collections import OrderedDict
from dataclasses import asdict, dataclass
from typing import Callable

import numpy as np

from .geometry import FarField, Grid, SetRegion
from .quadrature import check_s, get_table, half_line_mass_1d, interaction_1d
from .regions import FUNCTION_NAMES, Region, safe_eval

# Largest domain size for the dense quadratic form (entries of the n_D x n_D matrix).
MAX_FORM_ENTRIES = 6 * 10**7
# Layers of virtual exterior cells added around the box in 2D before the
# angular far-field quadrature takes over.
PAD_CELLS = 8


class ResourceError(MemoryError):
    pass


# ---------------------------------------------------------------------------
# Double well
# ---------------------------------------------------------------------------

@dataclass(frozen=True)
class DoubleWell:
    """Potential ``W`` with wells at ±1.

    The default is ``(1 - u^2)^2``.  A custom rule is an expression in ``u``
    (see :meth:`from_expression`); its derivative is taken by central
    differences.
    """

    expression: str = "(1 - u**2)**2"

    def __post_init__(self):
        if self.expression != DoubleWell.expression:
            self._validate()

    @classmethod
    def from_expression(cls, text: str) -> "DoubleWell":
        return cls(text)

    @property
    def is_default(self) -> bool:
        return self.expression == DoubleWell.expression

    def __call__(self, u):
        u = np.asarray(u, dtype=float)
        if self.is_default:
            return (1.0 - u * u) ** 2
        env = {**FUNCTION_NAMES, "u": u}
        return np.broadcast_to(np.asarray(safe_eval(self.expression, env), dtype=float), u.shape).copy()

    def derivative(self, u):
        u = np.asarray(u, dtype=float)
        if self.is_default:
            return -4.0 * u * (1.0 - u * u)
        step = 1e-5
        return (
            -self(u + 2 * step) + 8 * self(u + step) - 8 * self(u - step) + self(u - 2 * step)
        ) / (12 * step)

    def _validate(self):
        t = np.linspace(-1, 1, 401)
        w = self(t)
        if not np.all(np.isfinite(w)):
            raise ValueError(f"W={self.expression!r} is not finite on [-1, 1]")
        if abs(w[0]) > 1e-12 or abs(w[-1]) > 1e-12:
            raise ValueError(f"W={self.expression!r} must vanish at -1 and 1")
        if np.any(w[1:-1] <= 0):
            raise ValueError(f"W={self.expression!r} must be positive on (-1, 1)")


# ---------------------------------------------------------------------------
# Fields
# ---------------------------------------------------------------------------

@dataclass(frozen=True, eq=False)
class ExteriorDatum:
    """Exterior values of g: one value per grid cell plus a far-field rule.

    Entries at domain cells are ignored.
    """

    grid: Grid
    values: np.ndarray
    far: FarField

    def __post_init__(self):
        v = np.asarray(self.values, dtype=float).reshape(-1)
        if v.size != self.grid.size:
            raise ValueError("exterior values must cover every grid cell")
        if np.any(np.abs(v[self.grid.ext_index]) > 1 + 1e-12):
            raise ValueError("exterior values must lie in [-1, 1]")
        for val in (self.far.value, self.far.other):
            if val is not None and abs(val) > 1 + 1e-12:
                raise ValueError("far-field values must lie in [-1, 1]")
        v = v.copy()
        v.flags.writeable = False
        object.__setattr__(self, "values", v)

    @classmethod
    def constant(cls, grid: Grid, c: float) -> "ExteriorDatum":
        return cls(grid, np.full(grid.size, float(c)), FarField(float(c)))

    @classmethod
    def sample(cls, grid: Grid, func: Callable[[np.ndarray], np.ndarray], far: FarField) -> "ExteriorDatum":
        """Sample ``func`` at cell centers, clamping to [-1, 1] with a warning."""
        vals = np.asarray(func(grid.centers), dtype=float).reshape(-1)
        ext = grid.ext_index
        bad = np.abs(vals[ext]) > 1
        if bad.any():
            warnings.warn(
                f"exterior datum leaves [-1, 1] at {int(bad.sum())} cells; values clamped",
                RuntimeWarning,
                stacklevel=2,
            )
        vals = np.clip(vals, -1.0, 1.0)
        return cls(grid, vals, far)

    @classmethod
    def from_set(cls, E: SetRegion) -> "ExteriorDatum":
        return cls(E.grid, E.signed(), E.far)

    @property
    def g_infinity(self) -> float | None:
        return self.far.value if self.far.is_constant else None

    def negated(self) -> "ExteriorDatum":
        return ExteriorDatum(self.grid, -self.values, self.far.negated())

    def on(self, grid: Grid, func=None) -> "ExteriorDatum":
        """Re-sample on another grid (``func`` defaults to nearest-cell transfer)."""
        if func is None:
            src = self.grid
            idx = _locate(src, grid.centers)
            inside = idx >= 0
            vals = self.far.evaluate(grid.centers)
            vals[inside] = self.values[idx[inside]]
            return ExteriorDatum(grid, vals, self.far)
        return ExteriorDatum.sample(grid, func, self.far)


def _locate(grid: Grid, pts: np.ndarray) -> np.ndarray:
    """Flat cell index containing each point, -1 outside the box."""
    rel = (pts - grid.lo[None, :]) / grid.h
    ij = np.floor(rel).astype(np.int64)
    ok = np.all((ij >= 0) & (ij < np.asarray(grid.shape)[None, :]), axis=1)
    out = np.full(len(pts), -1, dtype=np.int64)
    out[ok] = np.ravel_multi_index(tuple(ij[ok].T), grid.shape)
    return out


@dataclass(frozen=True, eq=False)
class PhaseField:
    """Values in [-1, 1] on the domain cells, paired with exterior data."""

    grid: Grid
    values: np.ndarray
    exterior: ExteriorDatum

    def __post_init__(self):
        v = np.asarray(self.values, dtype=float).reshape(-1)
        if v.size != self.grid.n_omega:
            raise ValueError(f"expected {self.grid.n_omega} domain values, got {v.size}")
        if np.any(np.abs(v) > 1 + 1e-12) or not np.all(np.isfinite(v)):
            raise ValueError("phase values must lie in [-1, 1]")
        if not self.exterior.grid.same_as(self.grid):
            raise ValueError("exterior datum lives on a different grid")
        v = v.copy()
        v.flags.writeable = False
        object.__setattr__(self, "values", v)

    @classmethod
    def constant(cls, exterior: ExteriorDatum, c: float) -> "PhaseField":
        return cls(exterior.grid, np.full(exterior.grid.n_omega, float(c)), exterior)

    @classmethod
    def from_set(cls, E: SetRegion, exterior: ExteriorDatum) -> "PhaseField":
        return cls(E.grid, E.signed()[E.grid.omega_index], exterior)

    def with_values(self, values) -> "PhaseField":
        return PhaseField(self.grid, values, self.exterior)

    def full(self) -> np.ndarray:
        out = np.array(self.exterior.values, dtype=float)
        out[self.grid.omega_index] = self.values
        return out


@dataclass
class EnergyBreakdown:
    kinetic_interior: float
    kinetic_cross: float
    kinetic_tail: float
    potential: float
    total: float
    eps: float | None = None
    s: float | None = None
    h: float | None = None
    R: float | None = None

    @property
    def kinetic(self) -> float:
        return self.kinetic_interior + self.kinetic_cross + self.kinetic_tail

    def to_dict(self) -> dict:
        d = asdict(self)
        d["kinetic"] = self.kinetic
        return d


# ---------------------------------------------------------------------------
# 1D run-length evaluation
# ---------------------------------------------------------------------------

@dataclass
class Runs:
    a: np.ndarray
    b: np.ndarray
    value: np.ndarray
    inside: np.ndarray
    far: np.ndarray  # piece lies outside the grid box


def _far_pieces_1d(grid: Grid, far: FarField):
    lo, hi = float(grid.lo[0]), float(grid.hi[0])
    pieces = []
    for a, b in ((-math.inf, lo), (hi, math.inf)):
        cuts = [a, b]
        if far.normal is not None:
            t = far.offset / far.normal[0]
            if a < t < b:
                cuts = [a, t, b]
        for x0, x1 in zip(cuts[:-1], cuts[1:]):
            if math.isinf(x0):
                rep = x1 - 1.0
            elif math.isinf(x1):
                rep = x0 + 1.0
            else:
                rep = 0.5 * (x0 + x1)
            pieces.append((x0, x1, float(far.evaluate([[rep]])[0])))
    return pieces


def build_runs(grid: Grid, values_full: np.ndarray, domain: np.ndarray, far: FarField) -> Runs:
    """Maximal constant intervals of a 1D field (cells plus far pieces)."""
    if grid.dim != 1:
        raise ValueError("run-length evaluation is 1D only")
    v = np.asarray(values_full, dtype=float)
    d = np.asarray(domain, dtype=bool).reshape(-1)
    edges = grid.edges()
    change = np.flatnonzero((np.diff(v) != 0) | (np.diff(d) != 0)) + 1
    starts = np.concatenate([[0], change])
    stops = np.concatenate([change, [len(v)]])
    pieces = _far_pieces_1d(grid, far)
    left = [p for p in pieces if p[1] <= edges[0]]
    right = [p for p in pieces if p[0] >= edges[-1]]
    a = [p[0] for p in left] + edges[starts].tolist() + [p[0] for p in right]
    b = [p[1] for p in left] + edges[stops].tolist() + [p[1] for p in right]
    val = [p[2] for p in left] + v[starts].tolist() + [p[2] for p in right]
    ins = [False] * len(left) + d[starts].tolist() + [False] * len(right)
    farf = [True] * len(left) + [False] * len(starts) + [True] * len(right)
    return Runs(np.array(a), np.array(b), np.array(val), np.array(ins, bool), np.array(farf, bool))


def kinetic_runs(runs: Runs, s: float, chunk: int = 2048) -> tuple[float, float, float]:
    """(interior, cross, tail) kinetic energy of a run decomposition."""
    n = len(runs.a)
    out = np.zeros(3)
    for i0 in range(0, n, chunk):
        i = np.arange(i0, min(n, i0 + chunk))[:, None]
        j = np.arange(n)[None, :]
        # choose the interval on the left as A
        I, J = np.broadcast_arrays(i, j)
        keep = (J > I) & (runs.inside[I] | runs.inside[J])
        I, J = I[keep], J[keep]
        dv = runs.value[I] - runs.value[J]
        nz = dv != 0
        I, J, dv = I[nz], J[nz], dv[nz]
        if len(I) == 0:
            continue
        w = interaction_1d(runs.a[I], runs.b[I], runs.a[J], runs.b[J], s)
        contrib = 2.0 * dv * dv * w
        both = runs.inside[I] & runs.inside[J]
        farpair = runs.far[I] | runs.far[J]
        out[0] += contrib[both].sum()
        out[1] += contrib[~both & ~farpair].sum()
        out[2] += contrib[~both & farpair].sum()
    return float(out[0]), float(out[1]), float(out[2])


# ---------------------------------------------------------------------------
# Quadratic form
# ---------------------------------------------------------------------------

@dataclass(eq=False)
class QuadraticForm:
    """Kinetic energy restricted to the domain cells as a quadratic form.

    ``energy(u) = sum_{i != j} W_ij (u_i - u_j)^2 + 2 sum_i (m_i u_i^2 - 2 beta_i u_i + gamma_i)``
    where the second sum collects the exterior interactions (the factor 2
    accounts for both orientations of a domain/exterior pair).
    """

    W: np.ndarray
    deg: np.ndarray
    m_cross: np.ndarray
    beta_cross: np.ndarray
    gamma_cross: np.ndarray
    m_tail: np.ndarray
    beta_tail: np.ndarray
    gamma_tail: np.ndarray

    @property
    def m(self) -> np.ndarray:
        return self.m_cross + self.m_tail

    @property
    def beta(self) -> np.ndarray:
        return self.beta_cross + self.beta_tail

    def breakdown(self, u) -> tuple[float, float, float]:
        u = np.asarray(u, dtype=float)
        interior = 2.0 * float(u @ (self.deg * u) - u @ (self.W @ u))
        cross = 2.0 * float(np.sum(self.m_cross * u * u - 2 * self.beta_cross * u + self.gamma_cross))
        tail = 2.0 * float(np.sum(self.m_tail * u * u - 2 * self.beta_tail * u + self.gamma_tail))
        return max(interior, 0.0), cross, tail

    def energy(self, u) -> float:
        return float(sum(self.breakdown(u)))

    def gradient(self, u) -> np.ndarray:
        u = np.asarray(u, dtype=float)
        return 4.0 * (self.deg * u - self.W @ u) + 4.0 * (self.m * u - self.beta)

    def hessian_diag(self) -> np.ndarray:
        return 4.0 * (self.deg + self.m)

    def quad(self, d: np.ndarray, idx: np.ndarray | None = None) -> np.ndarray:
        """``d^T A d`` for perturbations supported on ``idx`` (rows of ``d``)."""
        if idx is None:
            return np.einsum("...i,...i->...", d, 2 * (self.deg + self.m) * d) - 2 * np.einsum(
                "...i,ij,...j->...", d, self.W, d
            )
        A = -2.0 * self.W[np.ix_(idx, idx)]
        A[np.diag_indices(len(idx))] += 2 * (self.deg[idx] + self.m[idx])
        return np.einsum("...i,ij,...j->...", d, A, d)


_FORMS: "OrderedDict[tuple, QuadraticForm]" = OrderedDict()
_FORM_CACHE_SIZE = 6


def _far_masses_1d(grid: Grid, cells: np.ndarray, far: FarField, s: float):
    """Exact (mass, mass*g, mass*g^2) from the outside-box pieces per cell."""
    edges = grid.edges()
    a = edges[cells]
    b = edges[cells + 1]
    m = np.zeros(len(cells))
    mg = np.zeros(len(cells))
    mg2 = np.zeros(len(cells))
    for x0, x1, val in _far_pieces_1d(grid, far):
        if x1 <= edges[0]:
            w = interaction_1d(-b, -a, -x1, -x0, s)
        else:
            w = interaction_1d(a, b, x0, x1, s)
        m += w
        mg += w * val
        mg2 += w * val * val
    return m, mg, mg2


_GL_ANG_X, _GL_ANG_W = np.polynomial.legendre.leggauss(24)


def far_masses_2d(points: np.ndarray, lo, hi, s: float, far: FarField) -> tuple[np.ndarray, np.ndarray, np.ndarray]:
    """Point masses of the kernel over the exterior of the box ``[lo, hi]``.

    Returns ``(m, m*g, m*g^2)`` with ``g`` the far-field value, using the
    radial antiderivative along rays and Gauss–Legendre in the angle between
    the directions where the integrand has kinks.
    """
    pts = np.asarray(points, dtype=float)
    lo = np.asarray(lo, dtype=float)
    hi = np.asarray(hi, dtype=float)
    P = len(pts)
    q = 2.0 * s
    corners = np.array([[lo[0], lo[1]], [hi[0], lo[1]], [hi[0], hi[1]], [lo[0], hi[1]]])
    angs = [np.arctan2(corners[k, 1] - pts[:, 1], corners[k, 0] - pts[:, 0]) for k in range(4)]
    if far.normal is not None and not far.is_constant:
        nv = np.asarray(far.normal, dtype=float)
        base = math.atan2(nv[1], nv[0])
        angs += [np.full(P, base + math.pi / 2), np.full(P, base - math.pi / 2)]
        for k in range(2):
            j = 1 - k
            if abs(nv[j]) < 1e-300:
                continue
            for side in (lo[k], hi[k]):
                t = (far.offset - nv[k] * side) / nv[j]
                if lo[j] - 1e-12 <= t <= hi[j] + 1e-12:
                    pt = np.zeros(2)
                    pt[k], pt[j] = side, t
                    angs.append(np.arctan2(pt[1] - pts[:, 1], pt[0] - pts[:, 0]))
    A = np.mod(np.stack(angs, axis=1), 2 * np.pi)
    A = np.sort(np.concatenate([np.zeros((P, 1)), A, np.full((P, 1), 2 * np.pi)], axis=1), axis=1)
    a0, a1 = A[:, :-1], A[:, 1:]
    half = 0.5 * (a1 - a0)
    phi = 0.5 * (a0 + a1)[..., None] + half[..., None] * _GL_ANG_X[None, None, :]
    wt = half[..., None] * _GL_ANG_W[None, None, :]
    e0, e1 = np.cos(phi), np.sin(phi)
    x0 = pts[:, 0][:, None, None]
    x1 = pts[:, 1][:, None, None]
    with np.errstate(divide="ignore", invalid="ignore"):
        r0 = np.minimum(
            np.where(e0 > 0, (hi[0] - x0) / e0, np.where(e0 < 0, (lo[0] - x0) / e0, np.inf)),
            np.where(e1 > 0, (hi[1] - x1) / e1, np.where(e1 < 0, (lo[1] - x1) / e1, np.inf)),
        )
    tot = r0 ** (-q) / q
    if far.is_constant:
        m = np.sum(wt * tot, axis=(1, 2))
        g = float(far.value)
        return m, m * g, m * g * g
    nv = np.asarray(far.normal, dtype=float)
    tau = far.offset - (pts @ nv)[:, None, None]
    sig = nv[0] * e0 + nv[1] * e1
    with np.errstate(divide="ignore", invalid="ignore"):
        rc = tau / sig
        ins_pos = np.where(rc > r0, (r0 ** (-q) - np.abs(rc) ** (-q)) / q, 0.0)
        ins_neg = np.maximum(r0, rc) ** (-q) / q
        zero = np.where(tau > 0, tot, 0.0)
    inside = np.where(np.abs(sig) < 1e-15, zero, np.where(sig > 0, ins_pos, ins_neg))
    m_in = np.sum(wt * inside, axis=(1, 2))
    m_all = np.sum(wt * tot, axis=(1, 2))
    m_out = m_all - m_in
    gv, go = float(far.value), float(far.other)
    return m_all, m_in * gv + m_out * go, m_in * gv * gv + m_out * go * go


def _field_key(grid, values_full, domain, far, s, pad):
    return (
        grid.key,
        hash(np.asarray(domain, bool).tobytes()),
        hash(np.asarray(values_full, float)[~np.asarray(domain, bool)].tobytes()),
        tuple(sorted(far.to_dict().items(), key=lambda kv: kv[0])).__repr__(),
        s,
        pad,
    )


def assemble_form(grid: Grid, values_full, domain, far: FarField, s: float, pad: int | None = None) -> QuadraticForm:
    """Quadratic form of the kinetic energy for the cells in ``domain``.

    ``values_full`` supplies exterior values on the non-domain cells; outside
    the box the field follows ``far``.
    """
    s = check_s(s)
    domain = np.asarray(domain, dtype=bool).reshape(-1)
    values_full = np.asarray(values_full, dtype=float).reshape(-1)
    if pad is None:
        pad = PAD_CELLS if grid.dim == 2 else 0
    key = _field_key(grid, values_full, domain, far, s, pad)
    if key in _FORMS:
        _FORMS.move_to_end(key)
        return _FORMS[key]
    D = np.flatnonzero(domain)
    X = np.flatnonzero(~domain)
    nD = len(D)
    if nD == 0:
        raise ValueError("empty domain")
    if nD * nD > MAX_FORM_ENTRIES:
        raise ResourceError(
            f"dense form with {nD} domain cells exceeds the memory guard; coarsen the grid"
        )
    n = grid.dim
    scale = grid.h ** (n - 2 * s)
    shape = np.asarray(grid.shape)
    table = get_table(n, s, int(shape.max() + 2 * pad))
    mi = grid.multi_index
    iD = mi[D]
    W = np.empty((nD, nD))
    for r0 in range(0, nD, 1024):
        off = iD[r0 : r0 + 1024, None, :] - iD[None, :, :]
        blk = table.lookup(np.abs(off)) * scale
        W[r0 : r0 + 1024] = blk
    W[np.diag_indices(nD)] = 0.0
    deg = W.sum(axis=1)

    # exterior cells inside the box (plus virtual padding cells in 2D)
    ext_idx = mi[X]
    ext_val = values_full[X]
    if pad > 0:
        full_shape = shape + 2 * pad
        allidx = np.stack(np.unravel_index(np.arange(int(np.prod(full_shape))), tuple(full_shape)), axis=1) - pad
        ring = np.any((allidx < 0) | (allidx >= shape[None, :]), axis=1)
        pidx = allidx[ring]
        pctr = grid.lo[None, :] + (pidx + 0.5) * grid.h
        ext_idx = np.concatenate([ext_idx, pidx])
        ext_val = np.concatenate([ext_val, far.evaluate(pctr)])
    mc = np.zeros(nD)
    bc = np.zeros(nD)
    gc = np.zeros(nD)
    step = max(1, 4_000_000 // max(1, len(ext_idx)))
    for r0 in range(0, nD, step):
        off = iD[r0 : r0 + step, None, :] - ext_idx[None, :, :]
        w = table.lookup(np.abs(off)) * scale
        mc[r0 : r0 + step] = w.sum(axis=1)
        bc[r0 : r0 + step] = w @ ext_val
        gc[r0 : r0 + step] = w @ (ext_val * ext_val)

    if n == 1:
        mt, bt, gt = _far_masses_1d(grid, D, far, s)
    else:
        plo = grid.lo - pad * grid.h
        phi_ = grid.hi + pad * grid.h
        mt, bt, gt = far_masses_2d(grid.centers[D], plo, phi_, s, far)
        mt, bt, gt = (v * grid.cell_volume for v in (mt, bt, gt))
    form = QuadraticForm(W, deg, mc, bc, gc, mt, bt, gt)
    _FORMS[key] = form
    while len(_FORMS) > _FORM_CACHE_SIZE:
        _FORMS.popitem(last=False)
    return form


def phase_form(u: PhaseField, s: float) -> QuadraticForm:
    return assemble_form(u.grid, u.exterior.values, u.grid.omega_flat, u.exterior.far, s)


# ---------------------------------------------------------------------------
# Energies
# ---------------------------------------------------------------------------

def _kinetic_parts(grid: Grid, values_full, domain, far, s, method="auto"):
    if method == "auto":
        method = "runs" if grid.dim == 1 else "form"
    if method == "runs":
        return kinetic_runs(build_runs(grid, values_full, domain, far), s)
    if method == "form":
        form = assemble_form(grid, values_full, domain, far, s)
        return form.breakdown(np.asarray(values_full, float)[np.asarray(domain, bool).reshape(-1)])
    raise ValueError(f"unknown method {method!r}")


def kinetic_breakdown(u: PhaseField, s: float, method: str = "auto") -> tuple[float, float, float]:
    """(interior, cross, tail) parts of the kinetic energy of ``u``.

    ``tail`` collects pairs with the second point outside the grid box.
    """
    return _kinetic_parts(u.grid, u.full(), u.grid.omega_flat, u.exterior.far, check_s(s), method)


def kinetic(u: PhaseField, s: float, method: str = "auto") -> float:
    return float(sum(kinetic_breakdown(u, s, method)))


def potential(u: PhaseField, W: DoubleWell | None = None) -> float:
    W = W or DoubleWell()
    return float(u.grid.cell_volume * np.sum(W(u.values)))


def f_eps(u: PhaseField, eps: float, s: float, W: DoubleWell | None = None, method: str = "auto") -> EnergyBreakdown:
    """``eps * kinetic(u) + eps^(1-2s) * potential(u)`` with its parts."""
    if eps <= 0:
        raise ValueError("eps must be positive")
    ki, kc, kt = kinetic_breakdown(u, s, method)
    P = potential(u, W)
    total = eps * (ki + kc + kt) + eps ** (1 - 2 * s) * P
    return EnergyBreakdown(ki, kc, kt, P, total, eps=eps, s=s, h=u.grid.h, R=u.grid.R)


def h_functional(E: SetRegion, g: ExteriorDatum, s: float, method: str = "auto") -> float:
    """Sharp-interface energy of ``E`` with exterior datum ``g``."""
    return kinetic(PhaseField.from_set(E, g), s, method)


def _domain_mask(grid: Grid, omega_prime) -> np.ndarray | str:
    if isinstance(omega_prime, str):
        if omega_prime != "full":
            raise ValueError("omega_prime must be a Region, a mask or 'full'")
        return "full"
    if isinstance(omega_prime, Region):
        return grid.mask_of(omega_prime).reshape(-1)
    return np.asarray(omega_prime, dtype=bool).reshape(-1)


def frac_perimeter(E: SetRegion, omega_prime, s: float, method: str = "auto") -> float:
    """Fractional perimeter of ``E`` relative to ``omega_prime``.

    ``omega_prime`` is a Region, a per-cell mask, or ``"full"`` for the whole
    space (then ``E`` or its complement must be bounded).  The value is one
    eighth of the kinetic energy of ``χ_E - χ_{E^c}`` on that sub-domain.
    """
    s = check_s(s)
    mask = _domain_mask(E.grid, omega_prime)
    far = E.far
    if isinstance(mask, str):
        if not far.is_constant:
            return math.inf
        mask = np.ones(E.grid.size, dtype=bool)
    if not mask.any() or np.all(E.flat == E.flat[0]) and far.is_constant and (far.value > 0) == E.flat[0]:
        return 0.0
    return float(sum(_kinetic_parts(E.grid, E.signed(), mask, far, s, method))) / 8.0


def ladder(u: PhaseField, eps: float, s: float, m_list, k: int, W: DoubleWell | None = None, energy: float | None = None) -> float:
    """k-th functional of the asymptotic ladder, by the one-step recursion.

    ``m_list`` holds ``m_0, ..., m_{k-1}``; ``energy`` may carry a
    precomputed ``F_eps(u)``.
    """
    if eps == 0:
        raise ValueError("eps must be nonzero")
    if k < 1:
        raise ValueError("k must be at least 1")
    m_list = list(m_list)
    if len(m_list) < k:
        raise ValueError(f"need {k} values m_0..m_{k - 1}, got {len(m_list)}")
    F = f_eps(u, eps, s, W).total if energy is None else float(energy)
    for j in range(k):
        F = (F - m_list[j]) / eps
    return F


def ladder_telescoped(F: float, eps: float, m_list, k: int) -> float:
    return (F - sum(eps**j * m for j, m in enumerate(list(m_list)[:k]))) / eps**k
