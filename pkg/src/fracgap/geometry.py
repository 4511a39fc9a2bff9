"""Uniform grids, discrete sets, boundary coverings and clean-ball search.

All discrete objects live on a uniform Cartesian grid of square cells; a
cell belongs to a region when its center does.  Outside the grid box every
field is described by a :class:`FarField`.
"""

from __future__ import annotations

import math
from dataclasses import dataclass, field
from functools import cached_property
from typing import Callable, Sequence

import numpy as np

from .regions import HalfSpace, Region

# Relative slack (in units of h) for center-in-ball tests.
_BALL_TOL = 1e-9


class ConfigurationError(ValueError):
    """Invalid grid / domain configuration."""


class NotClean(RuntimeError):
    """No clean ball pair exists near a boundary point at the requested scale."""


class DeltaTooLarge(ValueError):
    pass


@dataclass(frozen=True, eq=False)
class Grid:
    """Uniform cell grid over an axis-aligned box.

    Cells are indexed in C order; ``omega_mask`` has the grid shape and marks
    cells whose center lies in the domain.
    """

    lo: np.ndarray
    hi: np.ndarray
    shape: tuple[int, ...]
    h: float
    omega_mask: np.ndarray
    R: float

    @property
    def dim(self) -> int:
        return len(self.shape)

    @property
    def size(self) -> int:
        return int(np.prod(self.shape))

    @property
    def cell_volume(self) -> float:
        return self.h**self.dim

    @cached_property
    def centers(self) -> np.ndarray:
        axes = [self.lo[k] + (np.arange(self.shape[k]) + 0.5) * self.h for k in range(self.dim)]
        mesh = np.meshgrid(*axes, indexing="ij")
        pts = np.stack([m.ravel() for m in mesh], axis=1)
        pts.flags.writeable = False
        return pts

    @cached_property
    def multi_index(self) -> np.ndarray:
        idx = np.stack(np.unravel_index(np.arange(self.size), self.shape), axis=1)
        idx.flags.writeable = False
        return idx

    @cached_property
    def omega_flat(self) -> np.ndarray:
        return self.omega_mask.ravel()

    @cached_property
    def omega_index(self) -> np.ndarray:
        return np.flatnonzero(self.omega_flat)

    @cached_property
    def ext_index(self) -> np.ndarray:
        return np.flatnonzero(~self.omega_flat)

    @property
    def n_omega(self) -> int:
        return len(self.omega_index)

    @cached_property
    def key(self) -> tuple:
        return (
            tuple(self.lo.tolist()),
            tuple(self.hi.tolist()),
            self.shape,
            self.h,
            hash(self.omega_flat.tobytes()),
            self.R,
        )

    def mask_of(self, region: Region) -> np.ndarray:
        return region.contains(self.centers).reshape(self.shape)

    def same_as(self, other: "Grid") -> bool:
        return self is other or self.key == other.key

    def edges(self, axis: int = 0) -> np.ndarray:
        return self.lo[axis] + np.arange(self.shape[axis] + 1) * self.h


def build_grid(box, resolution, omega: Region | np.ndarray, R: float | None = None) -> Grid:
    """Build a grid over ``box`` with square cells and evaluate the Ω mask.

    ``box`` is ``(lo, hi)`` in 1D or a sequence of per-axis ``(lo, hi)``
    pairs; ``resolution`` is cells per axis (int or sequence).  ``omega`` is
    a :class:`Region` or an explicit boolean mask of the grid shape.
    """
    box = np.asarray(box, dtype=float)
    if box.ndim == 1:
        box = box[None, :]
    dim = box.shape[0]
    if dim not in (1, 2):
        raise ConfigurationError(f"only dimensions 1 and 2 are supported, got {dim}")
    res = np.broadcast_to(np.asarray(resolution, dtype=int), (dim,))
    if np.any(res < 2):
        raise ConfigurationError("resolution must be at least 2 cells per axis")
    lo, hi = box[:, 0].copy(), box[:, 1].copy()
    if np.any(hi <= lo):
        raise ConfigurationError("box must have hi > lo on every axis")
    hs = (hi - lo) / res
    h = float(hs[0])
    if not np.allclose(hs, h, rtol=1e-12, atol=0):
        raise ConfigurationError(f"cells must be square; per-axis spacings {hs.tolist()}")
    corners = np.array(np.meshgrid(*[(a, b) for a, b in zip(lo, hi)], indexing="ij")).reshape(dim, -1).T
    half_diag = float(np.linalg.norm(corners, axis=1).max())
    if R is None:
        R = half_diag
    if R < half_diag * (1 - 1e-12):
        raise ConfigurationError(
            f"truncation radius R={R} must enclose the box (needs R >= {half_diag:.6g})"
        )
    shape = tuple(int(r) for r in res)
    grid = Grid(lo=lo, hi=hi, shape=shape, h=h, omega_mask=np.zeros(shape, bool), R=float(R))
    if isinstance(omega, np.ndarray):
        mask = np.asarray(omega, dtype=bool).reshape(shape)
    else:
        mask = grid.mask_of(omega)
    if not mask.any():
        raise ConfigurationError("domain mask is empty on this grid")
    _check_thickness(mask)
    mask.flags.writeable = False
    object.__setattr__(grid, "omega_mask", mask)
    return grid


def _check_thickness(mask: np.ndarray) -> None:
    # every domain cell needs a domain neighbour along each axis (components >= 2 cells thick)
    for axis in range(mask.ndim):
        prev = np.roll(mask, 1, axis=axis)
        nxt = np.roll(mask, -1, axis=axis)
        lonely = mask & ~prev & ~nxt
        if lonely.any():
            raise ConfigurationError("domain has components thinner than 2 cells; refine the grid")


# ---------------------------------------------------------------------------
# Far field and discrete sets
# ---------------------------------------------------------------------------

@dataclass(frozen=True)
class FarField:
    """Values of a field outside the grid box.

    Without ``normal`` the field equals ``value`` everywhere outside the box.
    With a half-space ``{x . normal < offset}`` it equals ``value`` there and
    ``other`` on the complement.
    """

    value: float
    other: float | None = None
    normal: tuple[float, ...] | None = None
    offset: float = 0.0

    def __post_init__(self):
        if (self.normal is None) != (self.other is None):
            raise ValueError("FarField needs both `other` and `normal`, or neither")

    @property
    def halfspace(self) -> HalfSpace | None:
        return None if self.normal is None else HalfSpace(tuple(self.normal), self.offset)

    @property
    def is_constant(self) -> bool:
        return self.normal is None or self.other == self.value

    def evaluate(self, pts) -> np.ndarray:
        pts = np.atleast_2d(np.asarray(pts, dtype=float))
        if self.normal is None:
            return np.full(len(pts), float(self.value))
        return np.where(self.halfspace.contains(pts), self.value, self.other)

    def negated(self) -> "FarField":
        return FarField(-self.value, None if self.other is None else -self.other, self.normal, self.offset)

    def to_dict(self) -> dict:
        return {"value": self.value, "other": self.other, "normal": self.normal, "offset": self.offset}


FAR_EMPTY = "empty"
FAR_FULL = "full"


@dataclass(frozen=True, eq=False)
class SetRegion:
    """A measurable set E given cell-wise on a grid plus a far-field rule.

    ``far_field`` is ``"empty"``, ``"full"`` or a :class:`HalfSpace`
    (E contains the half-space outside the box).
    """

    grid: Grid
    indicator: np.ndarray
    far_field: str | HalfSpace = FAR_EMPTY
    check: bool = field(default=True, repr=False)

    def __post_init__(self):
        ind = np.asarray(self.indicator, dtype=bool).reshape(self.grid.shape)
        ind.flags.writeable = False
        object.__setattr__(self, "indicator", ind)
        if self.far_field not in (FAR_EMPTY, FAR_FULL) and not isinstance(self.far_field, HalfSpace):
            raise ValueError(f"unknown far_field {self.far_field!r}")
        if self.check:
            self._check_boundary_layer()

    def _check_boundary_layer(self):
        ring = np.ones(self.grid.shape, dtype=bool)
        inner = tuple(slice(1, -1) for _ in self.grid.shape)
        ring[inner] = False
        ring &= ~self.grid.omega_mask  # domain cells are free
        expected = self.far_values(self.grid.centers[ring.ravel()]) > 0
        if np.any(expected != self.indicator[ring]):
            raise ValueError("outermost ring of cells disagrees with the far-field rule")

    @classmethod
    def from_region(cls, grid: Grid, region: Region, far_field=FAR_EMPTY, check=True) -> "SetRegion":
        return cls(grid, grid.mask_of(region), far_field, check)

    @property
    def flat(self) -> np.ndarray:
        return self.indicator.ravel()

    def far_values(self, pts) -> np.ndarray:
        """±1 indicator of E evaluated by the far-field rule at ``pts``."""
        pts = np.atleast_2d(pts)
        if self.far_field == FAR_EMPTY:
            return -np.ones(len(pts))
        if self.far_field == FAR_FULL:
            return np.ones(len(pts))
        return np.where(self.far_field.contains(pts), 1.0, -1.0)

    @property
    def far(self) -> FarField:
        """The far-field rule expressed as a ±1-valued :class:`FarField`."""
        if self.far_field == FAR_EMPTY:
            return FarField(-1.0)
        if self.far_field == FAR_FULL:
            return FarField(1.0)
        hs = self.far_field
        return FarField(1.0, -1.0, tuple(hs.normal), hs.offset)

    def complement(self) -> "SetRegion":
        if self.far_field == FAR_EMPTY:
            ff = FAR_FULL
        elif self.far_field == FAR_FULL:
            ff = FAR_EMPTY
        else:
            hs = self.far_field
            ff = HalfSpace(tuple(-v for v in hs.normal), -hs.offset)
        return SetRegion(self.grid, ~self.indicator, ff, check=False)

    def signed(self) -> np.ndarray:
        """χ_E − χ_{E^c} per cell (flat)."""
        return np.where(self.flat, 1.0, -1.0)


def sym_diff_volume(E: SetRegion, F: SetRegion) -> float:
    if not E.grid.same_as(F.grid):
        raise ValueError("sets live on different grids")
    return float(np.count_nonzero(E.indicator != F.indicator)) * E.grid.cell_volume


def discrete_ball(grid: Grid, center, radius: float) -> np.ndarray:
    """Flat indices of cells whose centers lie in the closed ball."""
    d = np.linalg.norm(grid.centers - np.asarray(center, dtype=float)[None, :], axis=1)
    return np.flatnonzero(d <= radius + _BALL_TOL * grid.h)


# ---------------------------------------------------------------------------
# Lipschitz graphs and the boundary covering
# ---------------------------------------------------------------------------

def _rotation(angle: float) -> np.ndarray:
    c, s = math.cos(angle), math.sin(angle)
    return np.array([[c, -s], [s, c]])


@dataclass(frozen=True)
class LipschitzGraph:
    """Boundary piece ``{x0 + Q (x', psi(x'))}`` inside ``B_r(x0)``.

    In 2D ``rotation`` is an angle; ``psi`` maps an array of 1-D graph
    coordinates to heights.  In 1D the graph degenerates to the point ``x0``.
    """

    x0: tuple[float, ...]
    r: float
    L: float
    rho: float
    psi: Callable[[np.ndarray], np.ndarray] | None = None
    rotation: float = 0.0

    def __post_init__(self):
        if self.L < 0 or self.r <= 0 or self.rho <= 0:
            raise ValueError("need L >= 0, r > 0 and rho > 0")
        if (1 + self.L) * self.rho >= self.r:
            raise ValueError(f"(1+L)*rho = {(1 + self.L) * self.rho} must be below r = {self.r}")
        if self.dim == 2:
            if self.psi is None:
                raise ValueError("a 2D graph needs psi")
            if abs(float(self.psi(np.zeros(1))[0])) > 1e-12:
                raise ValueError("psi(0) must vanish")
            t = np.linspace(-self.rho, self.rho, 201)
            v = np.asarray(self.psi(t), dtype=float)
            slopes = np.abs(np.diff(v) / np.diff(t))
            if np.any(slopes > self.L * (1 + 1e-9) + 1e-12):
                raise ValueError(f"psi violates the Lipschitz bound L={self.L} (max slope {slopes.max():.4g})")

    @property
    def dim(self) -> int:
        return len(self.x0)

    def embed(self, xp: np.ndarray) -> np.ndarray:
        xp = np.asarray(xp, dtype=float)
        local = np.stack([xp, np.asarray(self.psi(xp), dtype=float)], axis=1)
        return np.asarray(self.x0)[None, :] + local @ _rotation(self.rotation).T


@dataclass
class CoveringResult:
    points: np.ndarray
    delta: float
    N_delta: int
    c1: float
    C1: float
    base_points: np.ndarray | None = None

    def to_dict(self) -> dict:
        return {
            "points": self.points.tolist(),
            "delta": self.delta,
            "N_delta": self.N_delta,
            "c1": self.c1,
            "C1": self.C1,
        }


def cover_boundary(graph: LipschitzGraph, delta: float, margin: float | None = None) -> CoveringResult:
    """Greedy separated points on the graph with ``B_delta(x_i) ⊂ B_r(x0)``.

    Base points are laid on a lattice in graph coordinates with spacing
    ``2(1+L)delta + margin``, restricted so that ``B'_{(1+L)delta}(x_i')``
    stays inside ``B'_rho``.
    """
    n = graph.dim
    threshold = graph.r - (1 + graph.L) * graph.rho
    if not 0 < delta < threshold:
        raise DeltaTooLarge(f"delta={delta} must satisfy 0 < delta < r - (1+L) rho = {threshold:.6g}")
    if n == 1:
        pts = np.asarray(graph.x0, dtype=float)[None, :]
        return CoveringResult(pts, delta, 1, 1.0, 1.0, base_points=np.zeros((1, 0)))
    if margin is None:
        margin = 1e-9 * delta
    step = 2 * (1 + graph.L) * delta + margin
    reach = graph.rho - (1 + graph.L) * delta
    if reach < 0:
        raise DeltaTooLarge(f"delta={delta} leaves no room in B'_rho (needs (1+L) delta <= rho)")
    count = int(math.floor(2 * reach / step)) + 1
    base = -reach + step * np.arange(count)
    base = base[base <= reach * (1 + 1e-14)]
    pts = graph.embed(base)
    N = len(pts)
    scale = N * delta ** (n - 1)
    res = CoveringResult(pts, delta, N, scale, scale, base_points=base[:, None])
    check_covering(res, graph)
    return res


def check_covering(res: CoveringResult, graph: LipschitzGraph) -> None:
    """Raise AssertionError unless the covering invariants hold."""
    pts = res.points
    x0 = np.asarray(graph.x0, dtype=float)
    dist0 = np.linalg.norm(pts - x0[None, :], axis=1)
    if np.any(dist0 + res.delta >= graph.r):
        raise AssertionError("a ball B_delta(x_i) leaves B_r(x0)")
    if len(pts) > 1:
        diff = np.linalg.norm(pts[:, None, :] - pts[None, :, :], axis=2)
        np.fill_diagonal(diff, np.inf)
        if diff.min() <= 2 * res.delta:
            raise AssertionError(f"points closer than 2 delta ({diff.min():.4g})")
    n = graph.dim
    scaled = res.N_delta * res.delta ** (n - 1)
    if not res.c1 * (1 - 1e-12) <= scaled <= res.C1 * (1 + 1e-12):
        raise AssertionError("N_delta outside the reported bracket")


# ---------------------------------------------------------------------------
# Clean balls
# ---------------------------------------------------------------------------

@dataclass
class CleanBallPair:
    p: np.ndarray
    q: np.ndarray
    radius: float
    p_cells: np.ndarray
    q_cells: np.ndarray

    def to_dict(self) -> dict:
        return {"p": self.p.tolist(), "q": self.q.tolist(), "radius": self.radius}


def ball_is_clean(grid: Grid, inside: np.ndarray, center, radius, x_i, half: float) -> np.ndarray | None:
    """Cells of the discrete ball if all lie in ``inside`` and within ``half`` of x_i."""
    cells = discrete_ball(grid, center, radius)
    if len(cells) == 0:
        return None
    if not inside[cells].all():
        return None
    d = np.linalg.norm(grid.centers[cells] - np.asarray(x_i)[None, :], axis=1)
    if np.any(d > half + _BALL_TOL * grid.h):
        return None
    # the ball must not reach the outer ring, where cells stand in for the far field
    mi = grid.multi_index[cells]
    if np.any(mi == 0) or np.any(mi == np.asarray(grid.shape) - 1):
        return None
    return cells


def clean_balls(E: SetRegion, x_i: Sequence[float], delta: float, c: float) -> CleanBallPair:
    """Find ``p`` with ``B_{cδ}(p) ⊂ E^c`` and ``q`` with ``B_{cδ}(q) ⊂ E``.

    Both discrete balls must sit inside ``B_{δ/2}(x_i)`` and ``|p - q| < δ``.
    Candidate centers are cell centers ordered by distance to ``x_i`` (ties
    by cell index); the first admissible pair is returned.
    """
    grid = E.grid
    if not 0 < c < 0.5:
        raise ValueError("c must lie in (0, 1/2)")
    if delta <= 4 * grid.h:
        raise NotClean(f"delta={delta} is not resolvable on this grid (needs delta > 4h = {4 * grid.h})")
    x_i = np.asarray(x_i, dtype=float)
    radius = c * delta
    half = delta / 2
    d = np.linalg.norm(grid.centers - x_i[None, :], axis=1)
    cand = np.flatnonzero(d <= half - radius + grid.h)
    cand = cand[np.lexsort((cand, d[cand]))]
    flat = E.flat
    ps, qs = [], []
    for idx in cand:
        ctr = grid.centers[idx]
        cells = ball_is_clean(grid, ~flat, ctr, radius, x_i, half)
        if cells is not None:
            ps.append((idx, cells))
        cells = ball_is_clean(grid, flat, ctr, radius, x_i, half)
        if cells is not None:
            qs.append((idx, cells))
    for pi, pcells in ps:
        for qi, qcells in qs:
            if np.linalg.norm(grid.centers[pi] - grid.centers[qi]) < delta:
                return CleanBallPair(grid.centers[pi].copy(), grid.centers[qi].copy(), radius, pcells, qcells)
    raise NotClean(
        f"no clean ball pair near {x_i.tolist()} at delta={delta}, c={c} "
        f"({len(ps)} candidates in E^c, {len(qs)} in E)"
    )
