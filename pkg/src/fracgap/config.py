"""Run configuration: an INI file with fixed sections and typed keys.

Every key has a type, a default and a one-line description; the table
``SCHEMA`` is the single source of truth for the config reader, the CLI flag
set and the README.  Unknown sections or keys are errors.
"""

from __future__ import annotations

import configparser
from dataclasses import asdict, dataclass, field
from pathlib import Path

from .regions import ExpressionError, parse_number, parse_region, safe_eval, CONSTANTS


class ConfigError(ValueError):
    """Invalid or unknown configuration entry."""


def _number(text: str) -> float:
    return parse_number(text)


def _integer(text: str) -> int:
    v = parse_number(text)
    if v != int(v):
        raise ExpressionError(f"{text!r} is not an integer")
    return int(v)


def _number_list(text: str) -> list[float]:
    value = safe_eval(f"({text},)" if "," not in text else f"({text})", dict(CONSTANTS))
    items = value if isinstance(value, tuple) else (value,)
    if not all(isinstance(v, (int, float)) for v in items):
        raise ExpressionError(f"{text!r} is not a list of numbers")
    return [float(v) for v in items]


def _optional_number(text: str) -> float | None:
    return None if text.strip().lower() in ("", "none", "auto") else parse_number(text)


def _boolean(text: str) -> bool:
    t = text.strip().lower()
    if t in ("1", "true", "yes", "on"):
        return True
    if t in ("0", "false", "no", "off"):
        return False
    raise ExpressionError(f"{text!r} is not a boolean")


def _string(text: str) -> str:
    return text.strip()


def _box(text: str) -> list[list[float]]:
    value = safe_eval(text, dict(CONSTANTS))
    if isinstance(value, tuple) and len(value) == 2 and all(isinstance(v, (int, float)) for v in value):
        return [[float(value[0]), float(value[1])]]
    if isinstance(value, tuple) and all(isinstance(v, tuple) and len(v) == 2 for v in value):
        return [[float(a), float(b)] for a, b in value]
    raise ExpressionError(f"{text!r} is not a box: use (lo, hi) or ((lo, hi), (lo, hi))")


@dataclass(frozen=True)
class Key:
    section: str
    name: str
    parse: object
    default: str
    help: str


SCHEMA: tuple[Key, ...] = (
    # problem
    Key("problem", "s", _number, "0.25", "fractional order, 0 < s < 1/2"),
    Key("problem", "n", _integer, "1", "dimension (1 or 2)"),
    Key("problem", "omega", _string, "interval(-1, 1)", "domain as a region expression"),
    Key("problem", "box", _box, "(-4, 4)", "computational box; the exterior beyond it is the far field"),
    Key("problem", "g", _string, "sign(x)", "exterior datum as an expression in x (and y)"),
    Key("problem", "g_far", _number, "-1", "far-field value of g (on the half-space side if a normal is given)"),
    Key("problem", "g_far_other", _optional_number, "1", "far-field value on the other side of the half-space"),
    Key("problem", "g_far_normal", _string, "(1,)", "normal of the far-field half-space, or none for a constant far field"),
    Key("problem", "g_far_offset", _number, "0", "offset of the far-field half-space"),
    Key("problem", "R", _number, "4", "truncation radius; the far field carries the mass beyond the box"),
    Key("problem", "W", _string, "(1 - u**2)**2", "double-well potential as an expression in u"),
    # grid
    Key("grid", "base_h", _number, "2**-8", "cell size used for the sharp-interface minimization"),
    Key("grid", "h_ratio", _number, "8", "construction grids use h = delta / h_ratio"),
    Key("grid", "max_cells", _integer, "4000000", "memory guard on the number of grid cells per construction"),
    # sweep
    Key("sweep", "eps_list", _number_list, "2**-4, 2**-5, 2**-6, 2**-7, 2**-8, 2**-9, 2**-10, 2**-11",
        "decreasing list of eps values"),
    Key("sweep", "mu_offset", _number, "0.1", "the divergence check uses mu = 1 - 2s + mu_offset"),
    Key("sweep", "mu_tail", _integer, "5", "number of smallest-eps points in the divergence check"),
    Key("sweep", "ladder_k", _integer, "2", "highest ladder order reported per eps"),
    Key("sweep", "workers", _integer, "1", "worker processes for the eps points"),
    # construct
    Key("construct", "case", _string, "interior", "interior or boundary"),
    Key("construct", "x0", _string, "(0,)", "base point of the boundary piece to cover"),
    Key("construct", "r", _number, "0.5", "radius of the ball around x0"),
    Key("construct", "L", _number, "0", "Lipschitz constant of the boundary piece (2D)"),
    Key("construct", "rho", _number, "0.1", "half-width of the graph window (2D)"),
    Key("construct", "psi", _string, "0", "graph function of the boundary piece in local coordinate x (2D)"),
    Key("construct", "rotation", _number, "0", "rotation angle of the graph frame (2D)"),
    Key("construct", "c", _number, "0.2", "clean-ball fraction c in (0, 1/4]"),
    Key("construct", "b", _optional_number, "auto", "level b; auto uses 2 (interior) or the measured exterior level (boundary)"),
    Key("construct", "theta", _optional_number, "auto", "lift height; auto uses the optimal theta"),
    Key("construct", "delta_cap", _number, "4", "cap on delta / eps in the schedule"),
    Key("construct", "side", _string, "lower", "lower lifts -1 upward, upper lowers +1"),
    Key("construct", "tie_near", _optional_number, "auto", "among tied minimizers pick a jump nearest this point; auto uses x0 (1D interior only)"),
    # minimize
    Key("minimize", "J_max", _integer, "2", "maximum number of jumps in the 1D enumeration"),
    Key("minimize", "max_configs", _integer, "5000000", "enumeration budget"),
    Key("minimize", "tie_rtol", _number, "1e-9", "relative tolerance for tied minimizers"),
    Key("minimize", "seeds", _integer, "4", "random starts of the 2D local search"),
    Key("minimize", "tol", _number, "1e-8", "projected-gradient tolerance of the phase-field descent"),
    Key("minimize", "max_iter", _integer, "5000", "iteration budget of the phase-field descent"),
    # verify
    Key("verify", "omega_prime", _string, "interval(-0.5, 0.5)", "sub-domain of the almost-minimality check"),
    Key("verify", "almost_min_h", _number, "1/64", "cell size of the almost-minimality check"),
    Key("verify", "flip_budget", _integer, "3", "maximum number of flipped cells per competitor"),
    Key("verify", "rho_verify", _optional_number, "0.5", "distance used in Lambda; auto measures it on the grid"),
    Key("verify", "margin_tol", _number, "1e-10", "tolerance of the almost-minimality margin"),
    Key("verify", "almost_min", _boolean, "true", "run the almost-minimality check"),
    # output
    Key("output", "out", _string, "out", "output directory"),
    Key("output", "plots", _boolean, "true", "write the SVG gap plot"),
    Key("output", "seed", _integer, "0", "random seed"),
)

SECTIONS = tuple(dict.fromkeys(k.section for k in SCHEMA))
KEYS = {k.name: k for k in SCHEMA}


def valid_keys_text() -> str:
    return "; ".join(f"[{sec}] " + ", ".join(k.name for k in SCHEMA if k.section == sec) for sec in SECTIONS)


@dataclass
class RunConfig:
    s: float = 0.25
    n: int = 1
    omega: str = "interval(-1, 1)"
    box: list = field(default_factory=lambda: [[-4.0, 4.0]])
    g: str = "sign(x)"
    g_far: float = -1.0
    g_far_other: float | None = 1.0
    g_far_normal: str = "(1,)"
    g_far_offset: float = 0.0
    R: float = 4.0
    W: str = "(1 - u**2)**2"
    base_h: float = 2.0**-8
    h_ratio: float = 8.0
    max_cells: int = 4_000_000
    eps_list: list = field(default_factory=lambda: [2.0**-k for k in range(4, 12)])
    mu_offset: float = 0.1
    mu_tail: int = 5
    ladder_k: int = 2
    workers: int = 1
    case: str = "interior"
    x0: str = "(0,)"
    r: float = 0.5
    L: float = 0.0
    rho: float = 0.1
    psi: str = "0"
    rotation: float = 0.0
    c: float = 0.2
    b: float | None = None
    theta: float | None = None
    delta_cap: float = 4.0
    side: str = "lower"
    tie_near: float | None = None
    J_max: int = 2
    max_configs: int = 5_000_000
    tie_rtol: float = 1e-9
    seeds: int = 4
    tol: float = 1e-8
    max_iter: int = 5000
    omega_prime: str = "interval(-0.5, 0.5)"
    almost_min_h: float = 1.0 / 64
    flip_budget: int = 3
    rho_verify: float | None = 0.5
    margin_tol: float = 1e-10
    almost_min: bool = True
    out: str = "out"
    plots: bool = True
    seed: int = 0

    def to_dict(self) -> dict:
        return asdict(self)

    def replace(self, **changes) -> "RunConfig":
        data = self.to_dict()
        data.update(changes)
        return RunConfig(**data)

    # --- derived -----------------------------------------------------------
    def x0_point(self) -> tuple[float, ...]:
        v = safe_eval(self.x0, dict(CONSTANTS))
        v = v if isinstance(v, tuple) else (v,)
        return tuple(float(t) for t in v)

    def far_normal(self) -> tuple[float, ...] | None:
        if self.g_far_normal.strip().lower() in ("", "none"):
            return None
        v = safe_eval(self.g_far_normal, dict(CONSTANTS))
        v = v if isinstance(v, tuple) else (v,)
        return tuple(float(t) for t in v)

    def mu(self) -> float:
        return 1 - 2 * self.s + self.mu_offset


def validate(cfg: RunConfig) -> RunConfig:
    """Raise ConfigError unless the configuration is usable."""
    if not (0 < cfg.s < 0.5):
        raise ConfigError(f"s must lie in (0, 1/2), got {cfg.s}")
    if cfg.n not in (1, 2):
        raise ConfigError(f"n must be 1 or 2, got {cfg.n}")
    if len(cfg.box) != cfg.n:
        raise ConfigError(f"box has {len(cfg.box)} axes but n={cfg.n}")
    eps = list(cfg.eps_list)
    if not eps or any(e <= 0 for e in eps):
        raise ConfigError("eps_list must contain positive values")
    if any(a <= b for a, b in zip(eps, eps[1:])):
        raise ConfigError("eps_list must be sorted in strictly decreasing order")
    if cfg.case not in ("interior", "boundary"):
        raise ConfigError(f"case must be 'interior' or 'boundary', got {cfg.case!r}")
    if cfg.side not in ("lower", "upper"):
        raise ConfigError(f"side must be 'lower' or 'upper', got {cfg.side!r}")
    if not (0 < cfg.c <= 0.25):
        raise ConfigError(f"c must lie in (0, 1/4], got {cfg.c}")
    if cfg.b is not None and not (0 < cfg.b <= 2):
        raise ConfigError(f"b must lie in (0, 2], got {cfg.b}")
    if cfg.h_ratio <= 4:
        raise ConfigError(f"h_ratio must exceed 4 (lifted balls need delta > 4h), got {cfg.h_ratio}")
    if cfg.workers < 1:
        raise ConfigError("workers must be at least 1")
    if cfg.mu_offset <= 0:
        raise ConfigError("mu_offset must be positive")
    for name in ("base_h", "almost_min_h", "R", "r", "delta_cap", "tol"):
        if getattr(cfg, name) <= 0:
            raise ConfigError(f"{name} must be positive")
    if len(cfg.x0_point()) != cfg.n:
        raise ConfigError(f"x0 must have {cfg.n} coordinates")
    normal = cfg.far_normal()
    if normal is not None and len(normal) != cfg.n:
        raise ConfigError(f"g_far_normal must have {cfg.n} components")
    try:
        parse_region(cfg.omega)
        parse_region(cfg.omega_prime)
    except ExpressionError as exc:
        raise ConfigError(str(exc)) from None
    for lo, hi in cfg.box:
        cells = (hi - lo) / cfg.base_h
        if abs(cells - round(cells)) > 1e-9:
            raise ConfigError(f"box side {hi - lo} is not a multiple of base_h={cfg.base_h}")
    return cfg


def _apply(cfg_values: dict, section: str, name: str, text: str) -> None:
    matches = [k for k in SCHEMA if k.name == name and k.section == section]
    if not matches:
        raise ConfigError(f"unknown key {name!r} in section [{section}]; valid keys: {valid_keys_text()}")
    key = matches[0]
    try:
        cfg_values[key.name] = key.parse(text)
    except (ExpressionError, ValueError, TypeError) as exc:
        raise ConfigError(f"[{section}] {name}: {exc}") from None


def defaults() -> RunConfig:
    values: dict = {}
    for key in SCHEMA:
        _apply(values, key.section, key.name, key.default)
    return RunConfig(**values)


def parse_text(text: str, overrides: dict | None = None) -> RunConfig:
    """Parse INI text; ``overrides`` maps key names to strings and wins."""
    parser = configparser.ConfigParser(interpolation=None, inline_comment_prefixes=(";", "#"))
    parser.optionxform = str  # keys are case-sensitive (R, L, W)
    try:
        parser.read_string(text)
    except configparser.Error as exc:
        raise ConfigError(f"cannot read configuration: {exc}") from None
    values = defaults().to_dict()
    for section in parser.sections():
        if section not in SECTIONS:
            raise ConfigError(f"unknown section [{section}]; valid sections: {', '.join(SECTIONS)}")
        for name, text_value in parser.items(section):
            _apply(values, section, name, text_value)
    for name, text_value in (overrides or {}).items():
        key = KEYS.get(name)
        if key is None:
            raise ConfigError(f"unknown key {name!r}; valid keys: {valid_keys_text()}")
        _apply(values, key.section, key.name, str(text_value))
    return validate(RunConfig(**values))


def load(path=None, overrides: dict | None = None) -> RunConfig:
    text = "" if path is None else Path(path).read_text()
    return parse_text(text, overrides)


def dump(cfg: RunConfig) -> str:
    """INI text that parses back to ``cfg``."""
    lines = []
    data = cfg.to_dict()
    for sec in SECTIONS:
        lines.append(f"[{sec}]")
        for key in (k for k in SCHEMA if k.section == sec):
            v = data[key.name]
            if v is None:
                text = "auto"
            elif key.name == "eps_list":
                text = ", ".join(repr(float(e)) for e in v)
            elif key.name == "box":
                pairs = [f"({lo!r}, {hi!r})" for lo, hi in v]
                text = pairs[0] if len(pairs) == 1 else "(" + ", ".join(pairs) + ")"
            elif isinstance(v, bool):
                text = "true" if v else "false"
            else:
                text = repr(v) if isinstance(v, float) else str(v)
            lines.append(f"{key.name} = {text}")
        lines.append("")
    return "\n".join(lines)

