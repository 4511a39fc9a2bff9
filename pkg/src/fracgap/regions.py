"""Point-membership regions and a small safe expression language for them.

Regions are used to describe the domain, sets E and sub-domains in run
configurations, e.g. ``interval(-1, 1)`` in 1D or
``disk(0, 0, 1) & ~halfspace((0, 1), 0.25)`` in 2D.
"""

from __future__ import annotations

import ast
import math
from dataclasses import dataclass
from typing import Callable

import numpy as np


class Region:
    dim: int | None = None

    def contains(self, pts: np.ndarray) -> np.ndarray:
        raise NotImplementedError

    def __or__(self, other: "Region") -> "Region":
        return Union(self, other)

    def __and__(self, other: "Region") -> "Region":
        return Intersection(self, other)

    def __sub__(self, other: "Region") -> "Region":
        return Intersection(self, Complement(other))

    def __invert__(self) -> "Region":
        return Complement(self)


def _as_points(pts) -> np.ndarray:
    pts = np.asarray(pts, dtype=float)
    if pts.ndim == 1:
        pts = pts[:, None]
    return pts


@dataclass(frozen=True)
class Interval(Region):
    a: float
    b: float
    dim = 1

    def contains(self, pts):
        x = _as_points(pts)[:, 0]
        return (x > self.a) & (x < self.b)


@dataclass(frozen=True)
class IntervalList(Region):
    intervals: tuple[tuple[float, float], ...]
    dim = 1

    def contains(self, pts):
        x = _as_points(pts)[:, 0]
        out = np.zeros(x.shape, dtype=bool)
        for a, b in self.intervals:
            out |= (x > a) & (x < b)
        return out


@dataclass(frozen=True)
class Disk(Region):
    cx: float
    cy: float
    r: float
    dim = 2

    def contains(self, pts):
        p = _as_points(pts)
        return (p[:, 0] - self.cx) ** 2 + (p[:, 1] - self.cy) ** 2 < self.r**2


@dataclass(frozen=True)
class Rect(Region):
    x0: float
    y0: float
    x1: float
    y1: float
    dim = 2

    def contains(self, pts):
        p = _as_points(pts)
        return (p[:, 0] > self.x0) & (p[:, 0] < self.x1) & (p[:, 1] > self.y0) & (p[:, 1] < self.y1)


@dataclass(frozen=True)
class HalfSpace(Region):
    """The open half-space ``{x : x . normal < offset}``."""

    normal: tuple[float, ...]
    offset: float = 0.0

    @property
    def dim(self):  # type: ignore[override]
        return len(self.normal)

    def signed(self, pts) -> np.ndarray:
        return _as_points(pts) @ np.asarray(self.normal, dtype=float) - self.offset

    def contains(self, pts):
        return self.signed(pts) < 0


@dataclass(frozen=True)
class Everything(Region):
    def contains(self, pts):
        return np.ones(len(_as_points(pts)), dtype=bool)


@dataclass(frozen=True)
class Nothing(Region):
    def contains(self, pts):
        return np.zeros(len(_as_points(pts)), dtype=bool)


@dataclass(frozen=True)
class Union(Region):
    left: Region
    right: Region

    def contains(self, pts):
        return self.left.contains(pts) | self.right.contains(pts)


@dataclass(frozen=True)
class Intersection(Region):
    left: Region
    right: Region

    def contains(self, pts):
        return self.left.contains(pts) & self.right.contains(pts)


@dataclass(frozen=True)
class Complement(Region):
    inner: Region

    def contains(self, pts):
        return ~self.inner.contains(pts)


@dataclass(frozen=True)
class Predicate(Region):
    """Region given by an arbitrary vectorised predicate on point arrays."""

    func: Callable[[np.ndarray], np.ndarray]

    def contains(self, pts):
        return np.asarray(self.func(_as_points(pts)), dtype=bool)


# ---------------------------------------------------------------------------
# Safe expression evaluation
# ---------------------------------------------------------------------------

class ExpressionError(ValueError):
    pass


def _intervals(*pairs):
    return IntervalList(tuple((float(a), float(b)) for a, b in pairs))


REGION_NAMES: dict[str, Callable] = {
    "interval": Interval,
    "intervals": _intervals,
    "disk": Disk,
    "rect": Rect,
    "halfspace": lambda normal, offset=0.0: HalfSpace(tuple(float(v) for v in np.atleast_1d(normal)), float(offset)),
    "everything": Everything,
    "nothing": Nothing,
}

FUNCTION_NAMES: dict[str, Callable] = {
    "sign": np.sign,
    "abs": np.abs,
    "sqrt": np.sqrt,
    "exp": np.exp,
    "log": np.log,
    "sin": np.sin,
    "cos": np.cos,
    "tanh": np.tanh,
    "where": np.where,
    "clip": np.clip,
    "minimum": np.minimum,
    "maximum": np.maximum,
}

CONSTANTS = {"pi": math.pi, "e": math.e}

_BINOPS = {
    ast.Add: lambda a, b: a + b,
    ast.Sub: lambda a, b: a - b,
    ast.Mult: lambda a, b: a * b,
    ast.Div: lambda a, b: a / b,
    ast.Pow: lambda a, b: a**b,
    ast.BitOr: lambda a, b: a | b,
    ast.BitAnd: lambda a, b: a & b,
}
_CMPOPS = {
    ast.Lt: np.less,
    ast.LtE: np.less_equal,
    ast.Gt: np.greater,
    ast.GtE: np.greater_equal,
    ast.Eq: np.equal,
    ast.NotEq: np.not_equal,
}


def safe_eval(text: str, names: dict):
    """Evaluate ``text`` allowing only literals, arithmetic and the given names."""
    try:
        tree = ast.parse(text.strip(), mode="eval")
    except SyntaxError as exc:
        raise ExpressionError(f"cannot parse expression {text!r}: {exc.msg}") from None

    def ev(node):
        if isinstance(node, ast.Expression):
            return ev(node.body)
        if isinstance(node, ast.Constant) and isinstance(node.value, (int, float)):
            return node.value
        if isinstance(node, ast.Tuple):
            return tuple(ev(e) for e in node.elts)
        if isinstance(node, ast.Name):
            if node.id in names:
                return names[node.id]
            raise ExpressionError(f"unknown name {node.id!r} in {text!r}")
        if isinstance(node, ast.UnaryOp):
            v = ev(node.operand)
            if isinstance(node.op, ast.USub):
                return -v
            if isinstance(node.op, ast.UAdd):
                return +v
            if isinstance(node.op, ast.Invert):
                return ~v
        if isinstance(node, ast.BinOp) and type(node.op) in _BINOPS:
            return _BINOPS[type(node.op)](ev(node.left), ev(node.right))
        if isinstance(node, ast.Compare) and len(node.ops) == 1 and type(node.ops[0]) in _CMPOPS:
            return _CMPOPS[type(node.ops[0])](ev(node.left), ev(node.comparators[0]))
        if isinstance(node, ast.Call) and isinstance(node.func, ast.Name):
            fn = ev(node.func)
            if not callable(fn):
                raise ExpressionError(f"{node.func.id!r} is not callable")
            args = [ev(a) for a in node.args]
            kwargs = {k.arg: ev(k.value) for k in node.keywords}
            return fn(*args, **kwargs)
        raise ExpressionError(f"unsupported syntax in {text!r}: {ast.dump(node)[:60]}")

    return ev(tree)


def parse_region(text: str) -> Region:
    region = safe_eval(text, {**REGION_NAMES, **CONSTANTS})
    if not isinstance(region, Region):
        raise ExpressionError(f"{text!r} does not describe a region")
    return region


def parse_number(text: str) -> float:
    value = safe_eval(str(text), dict(CONSTANTS))
    if not isinstance(value, (int, float)):
        raise ExpressionError(f"{text!r} is not a number")
    return float(value)


def parse_field(text: str, dim: int) -> Callable[[np.ndarray], np.ndarray]:
    """Compile a scalar field expression in ``x`` (and ``y`` in 2D)."""
    axes = ("x", "y")[:dim]

    def field(pts):
        p = _as_points(pts)
        env = {**FUNCTION_NAMES, **CONSTANTS}
        env.update({name: p[:, k] for k, name in enumerate(axes)})
        value = safe_eval(text, env)
        return np.broadcast_to(np.asarray(value, dtype=float), (len(p),)).copy()

    # fail early on syntax / unknown names
    field(np.zeros((1, dim)))
    return field
