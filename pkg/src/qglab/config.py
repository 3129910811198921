"""Flat key=value run configuration.

A config file is plain text, one ``dotted.key = value`` per line, with ``#``
comments and blank lines ignored. Unknown keys are errors. Every field has a
default matching the standard desk-scale scenario, so an empty file is a
valid config. Lists (diag.s_list, sweep.epsilons) are comma-separated.

Documented ranges:

* grid.n: power of two, 8 .. 256; grid.box_length > 0
* params.*: positive; params.froude in (0, 1]
* time.dt: positive, or ``auto`` for min(0.5 dx / max|v0|, t_end/1000)
* time.t_end > 0
* init.seed: non-negative integer; init.spectrum_peak_k in [1, n/3)
* init.qg_amplitude >= 0 (target H^1 norm of the balanced part)
* init.osc_amplitude >= 0 (well-prepared coefficient c: the oscillating
  part is scaled to H^-1 norm c * epsilon)
* init.osc_extra_smoothness >= 0
* diag.s_list: values in [-2, 2], must contain 0 and 1
* diag.cadence: positive steps; diag.snapshot_every: 0 (off) or a positive
  multiple of cadence; diag.snapshot_t_max > 0
* sweep.epsilons: strictly decreasing positive values
"""

from __future__ import annotations

import math
from dataclasses import dataclass, field, replace

__all__ = [
    "ConfigError",
    "GridConfig",
    "ParamsConfig",
    "TimeConfig",
    "InitConfig",
    "DiagConfig",
    "SweepConfig",
    "RunConfig",
    "default_config",
    "parse_config_text",
    "load_config",
    "apply_overrides",
]


class ConfigError(ValueError):
    """Invalid, unknown or out-of-range configuration input."""


@dataclass
class GridConfig:
    n: int = 32
    box_length: float = 2.0 * math.pi


@dataclass
class ParamsConfig:
    epsilon: float = 0.1
    nu: float = 1e-2
    nu_prime: float = 5e-3
    froude: float = 1.0


@dataclass
class TimeConfig:
    dt: float | None = None  # None = auto policy
    t_end: float = 1.0


@dataclass
class InitConfig:
    seed: int = 7
    spectrum_peak_k: float = 2.0
    qg_amplitude: float = 0.5
    osc_amplitude: float = 0.1
    osc_extra_smoothness: float = 0.25


@dataclass
class DiagConfig:
    s_list: tuple = (-1.0, 0.0, 0.5, 1.0, 1.5)
    cadence: int = 10
    snapshot_every: int = 0
    snapshot_t_max: float = math.inf


@dataclass
class SweepConfig:
    epsilons: tuple = (0.1, 0.05, 0.02, 0.01)


@dataclass
class RunConfig:
    grid: GridConfig = field(default_factory=GridConfig)
    params: ParamsConfig = field(default_factory=ParamsConfig)
    time: TimeConfig = field(default_factory=TimeConfig)
    init: InitConfig = field(default_factory=InitConfig)
    diag: DiagConfig = field(default_factory=DiagConfig)
    sweep: SweepConfig = field(default_factory=SweepConfig)

    def with_epsilon(self, eps):
        return replace(self, params=replace(self.params, epsilon=eps))


def default_config():
    return RunConfig()


def _parse_int(key, raw):
    try:
        return int(raw)
    except ValueError:
        raise ConfigError(f"{key}: expected an integer, got {raw!r}") from None


def _parse_float(key, raw):
    try:
        return float(raw)
    except ValueError:
        raise ConfigError(f"{key}: expected a number, got {raw!r}") from None


def _parse_float_list(key, raw):
    try:
        return tuple(float(x) for x in raw.split(",") if x.strip())
    except ValueError:
        raise ConfigError(f"{key}: expected comma-separated numbers, got {raw!r}") from None


def _parse_dt(key, raw):
    if raw.strip().lower() == "auto":
        return None
    return _parse_float(key, raw)


_PARSERS = {
    "grid.n": _parse_int,
    "grid.box_length": _parse_float,
    "params.epsilon": _parse_float,
    "params.nu": _parse_float,
    "params.nu_prime": _parse_float,
    "params.froude": _parse_float,
    "time.dt": _parse_dt,
    "time.t_end": _parse_float,
    "init.seed": _parse_int,
    "init.spectrum_peak_k": _parse_float,
    "init.qg_amplitude": _parse_float,
    "init.osc_amplitude": _parse_float,
    "init.osc_extra_smoothness": _parse_float,
    "diag.s_list": _parse_float_list,
    "diag.cadence": _parse_int,
    "diag.snapshot_every": _parse_int,
    "diag.snapshot_t_max": _parse_float,
    "sweep.epsilons": _parse_float_list,
}


def _set_key(cfg, key, raw):
    parser = _PARSERS.get(key)
    if parser is None:
        raise ConfigError(f"unknown config key {key!r}")
    section, name = key.split(".", 1)
    setattr(getattr(cfg, section), name, parser(key, raw))


def parse_config_text(text, base=None):
    """Parse ``key = value`` lines over the defaults (or a given base)."""
    cfg = base if base is not None else default_config()
    for lineno, line in enumerate(text.splitlines(), start=1):
        stripped = line.split("#", 1)[0].strip()
        if not stripped:
            continue
        if "=" not in stripped:
            raise ConfigError(f"line {lineno}: expected 'key = value', got {line!r}")
        key, raw = (part.strip() for part in stripped.split("=", 1))
        _set_key(cfg, key, raw)
    validate_config(cfg)
    return cfg


def load_config(path):
    try:
        with open(path, "r", encoding="utf-8") as fh:
            text = fh.read()
    except OSError as err:
        raise ConfigError(f"cannot read config {path}: {err}") from None
    return parse_config_text(text)


def apply_overrides(cfg, overrides):
    """Apply repeatable ``key=value`` strings on top of a config."""
    for item in overrides:
        if "=" not in item:
            raise ConfigError(f"override {item!r} is not of the form key=value")
        key, raw = (part.strip() for part in item.split("=", 1))
        _set_key(cfg, key, raw)
    validate_config(cfg)
    return cfg


def validate_config(cfg):
    g, p, t, i, d, s = cfg.grid, cfg.params, cfg.time, cfg.init, cfg.diag, cfg.sweep
    if g.n < 8 or g.n > 256 or (g.n & (g.n - 1)) != 0:
        raise ConfigError(f"grid.n must be a power of two in [8, 256], got {g.n}")
    if g.box_length <= 0:
        raise ConfigError("grid.box_length must be positive")
    if p.epsilon <= 0 or p.nu <= 0 or p.nu_prime <= 0:
        raise ConfigError("params.epsilon, params.nu, params.nu_prime must be positive")
    if not 0.0 < p.froude <= 1.0:
        raise ConfigError("params.froude must lie in (0, 1]")
    if t.dt is not None and t.dt <= 0:
        raise ConfigError("time.dt must be positive or auto")
    if t.t_end <= 0:
        raise ConfigError("time.t_end must be positive")
    if i.seed < 0:
        raise ConfigError("init.seed must be non-negative")
    if not 1.0 <= i.spectrum_peak_k < g.n / 3.0:
        raise ConfigError(
            f"init.spectrum_peak_k must lie in [1, n/3), got {i.spectrum_peak_k}"
        )
    if i.qg_amplitude < 0 or i.osc_amplitude < 0 or i.osc_extra_smoothness < 0:
        raise ConfigError("init amplitudes and smoothness must be non-negative")
    if not d.s_list:
        raise ConfigError("diag.s_list must not be empty")
    if any(not -2.0 <= x <= 2.0 for x in d.s_list):
        raise ConfigError("diag.s_list values must lie in [-2, 2]")
    if 0.0 not in d.s_list or 1.0 not in d.s_list:
        raise ConfigError("diag.s_list must contain 0 and 1 (energy checks)")
    if d.cadence < 1:
        raise ConfigError("diag.cadence must be a positive step count")
    if d.snapshot_every < 0 or (d.snapshot_every and d.snapshot_every % d.cadence):
        raise ConfigError("diag.snapshot_every must be 0 or a multiple of cadence")
    if d.snapshot_t_max <= 0:
        raise ConfigError("diag.snapshot_t_max must be positive")
    if not s.epsilons:
        raise ConfigError("sweep.epsilons must not be empty")
    if any(e <= 0 for e in s.epsilons):
        raise ConfigError("sweep.epsilons must be positive")
    if any(a <= b for a, b in zip(s.epsilons, s.epsilons[1:])):
        raise ConfigError("sweep.epsilons must be strictly decreasing")
    return cfg
