"""Experiment configuration: INI-style ``key = value`` files with sections."""

from __future__ import annotations

import configparser
import math
from dataclasses import dataclass, field, replace
from pathlib import Path

from .errors import ConfigError
from .schedule import Schedule, schedule_case1, schedule_case2

__all__ = ["ExperimentConfig", "parse_config", "parse_config_text", "KEYS"]


@dataclass(frozen=True)
class ExperimentConfig:
    case: str  # "I", "II" or "open_loop"
    p: float | None = None
    T0: float | None = None
    lambda0: float = 3.5
    sigma: float = 1.0
    n_max: int = 2
    gamma0: float = 1.0
    a: float = 1.0
    c: float = 24.0
    N: int = 201
    dt_base: float = 1e-4
    stride: int = 10
    A: float = 0.0
    omega: float = 30.0
    init_scale: float = 1.0
    t_end: float = 1.0
    boundary_mode: str = "hold"
    out_dir: str = "out"
    snapshots: tuple[float, ...] = field(default_factory=tuple)

    def __post_init__(self):
        validate(self)

    def with_value(self, key: str, value) -> "ExperimentConfig":
        return replace(self, **{key: _coerce(key, value)})

    def schedule(self) -> Schedule:
        if self.case == "I":
            return schedule_case1(self.p, self.lambda0, self.n_max)
        if self.case == "II":
            return schedule_case2(self.T0, self.lambda0, self.n_max)
        raise ConfigError("open-loop experiments have no schedule")

    @property
    def horizon(self) -> float:
        return self.t_end if self.case == "open_loop" else self.schedule().T0


# section -> key -> (attribute, type, allowed range description)
KEYS = {
    "experiment": {
        "case": ("case", str, "one of I, II, open_loop"),
        "p": ("p", float, "p > 1 (Case I)"),
        "T0": ("T0", float, "T0 > 0 (Case II)"),
        "lambda0": ("lambda0", float, "lambda0 > 0"),
        "sigma": ("sigma", float, "sigma > 0"),
        "n_max": ("n_max", int, "integer >= 1"),
        "gamma0": ("gamma0", float, "gamma0 > 0"),
        "t_end": ("t_end", float, "t_end > 0 (open loop)"),
        "boundary_mode": ("boundary_mode", str, "zero or hold (open loop)"),
    },
    "plant": {
        "a": ("a", float, "a > 0"),
        "c": ("c", float, "finite real"),
    },
    "numerics": {
        "N": ("N", int, "integer >= 5"),
        "dt_base": ("dt_base", float, "0 < dt_base <= 0.1"),
        "stride": ("stride", int, "integer >= 1"),
    },
    "disturbance": {
        "A": ("A", float, "A >= 0"),
        "omega": ("omega", float, "finite real"),
    },
    "initial": {
        "scale": ("init_scale", float, "1 or 10"),
    },
    "output": {
        "dir": ("out_dir", str, "path"),
        "snapshots": ("snapshots", tuple, "comma-separated times >= 0"),
    },
}
_ATTR_INFO = {attr: (typ, rng) for sec in KEYS.values() for attr, typ, rng in sec.values()}


def _coerce(attr: str, raw):
    typ, rng = _ATTR_INFO[attr]
    try:
        if typ is tuple:
            if isinstance(raw, (tuple, list)):
                return tuple(float(v) for v in raw)
            return tuple(float(v) for v in str(raw).split(",") if v.strip())
        if typ is int:
            val = float(raw)
            if val != int(val):
                raise ValueError
            return int(val)
        return typ(raw)
    except (TypeError, ValueError):
        raise ConfigError(f"{attr}: cannot parse {raw!r} (allowed: {rng})") from None


def _require(ok: bool, attr: str, value):
    if not ok:
        raise ConfigError(f"{attr}={value!r} out of range (allowed: {_ATTR_INFO[attr][1]})")


def validate(cfg: ExperimentConfig) -> None:
    _require(cfg.case in ("I", "II", "open_loop"), "case", cfg.case)
    finite = all(math.isfinite(getattr(cfg, f)) for f in
                 ("lambda0", "sigma", "gamma0", "a", "c", "dt_base", "A", "omega", "init_scale", "t_end"))
    if not finite:
        raise ConfigError("numeric values must be finite")
    _require(cfg.lambda0 > 0, "lambda0", cfg.lambda0)
    _require(cfg.sigma > 0, "sigma", cfg.sigma)
    _require(cfg.n_max >= 1, "n_max", cfg.n_max)
    _require(cfg.gamma0 > 0, "gamma0", cfg.gamma0)
    _require(cfg.a > 0, "a", cfg.a)
    _require(cfg.N >= 5, "N", cfg.N)
    _require(0 < cfg.dt_base <= 0.1, "dt_base", cfg.dt_base)
    _require(cfg.stride >= 1, "stride", cfg.stride)
    _require(cfg.A >= 0, "A", cfg.A)
    _require(cfg.init_scale in (1.0, 10.0), "init_scale", cfg.init_scale)
    _require(cfg.t_end > 0, "t_end", cfg.t_end)
    _require(cfg.boundary_mode in ("zero", "hold"), "boundary_mode", cfg.boundary_mode)
    _require(all(s >= 0 for s in cfg.snapshots), "snapshots", cfg.snapshots)
    if cfg.case == "I":
        if cfg.p is None:
            raise ConfigError("missing required key p for case I (allowed: p > 1)")
    elif cfg.case == "II":
        if cfg.T0 is None:
            raise ConfigError("missing required key T0 for case II (allowed: T0 > 0)")
    if cfg.case != "open_loop":
        # surfaces DivergenceError / DomainError from the schedule builders
        sched = cfg.schedule()
        if cfg.lambda0 + cfg.c <= 0 or cfg.sigma + cfg.c <= 0:
            raise ConfigError(
                f"closed-form kernels need lambda0 + c > 0 and sigma + c > 0 "
                f"(lambda0={cfg.lambda0}, sigma={cfg.sigma}, c={cfg.c})")
        _require(all(t < sched.T0 for t in cfg.snapshots), "snapshots", cfg.snapshots)


def parse_config_text(text: str, source: str = "<string>") -> ExperimentConfig:
    parser = configparser.ConfigParser(interpolation=None)
    parser.optionxform = str  # keys are case-sensitive (T0, N, A)
    try:
        parser.read_string(text, source=source)
    except configparser.Error as exc:
        raise ConfigError(f"{source}: malformed config: {exc}") from None
    values = {}
    for section in parser.sections():
        if section not in KEYS:
            raise ConfigError(f"unknown section [{section}] (allowed: {', '.join(KEYS)})")
        for key, raw in parser.items(section):
            if key not in KEYS[section]:
                raise ConfigError(f"unknown key {section}.{key} "
                                  f"(allowed: {', '.join(KEYS[section])})")
            attr = KEYS[section][key][0]
            values[attr] = _coerce(attr, raw.strip())
    if "case" not in values:
        raise ConfigError("missing required key experiment.case (allowed: one of I, II, open_loop)")
    return ExperimentConfig(**values)


def parse_config(path) -> ExperimentConfig:
    path = Path(path)
    if not path.is_file():
        raise ConfigError(f"config file not found: {path}")
    return parse_config_text(path.read_text(), str(path))


def to_text(cfg: ExperimentConfig) -> str:
    """Inverse of parse_config_text (only non-None values)."""
    lines = []
    for section, keys in KEYS.items():
        lines.append(f"[{section}]")
        for key, (attr, typ, _) in keys.items():
            val = getattr(cfg, attr)
            if val is None:
                continue
            if typ is tuple:
                val = ",".join(repr(v) for v in val)
            lines.append(f"{key} = {val}")
        lines.append("")
    return "\n".join(lines)

