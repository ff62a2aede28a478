"""Run configuration: a flat ``key = value`` text file.

Grammar: one ``key = value`` pair per line; blank lines and lines starting
with ``#`` are ignored; keys are the field names of :class:`RunConfig`.
Floats are written with ``repr`` so a file produced by
:func:`format_config` parses back to an identical config and re-formats to
identical text.  ``absorber_onset = auto`` means ``0.8 * x_max``.
"""
from dataclasses import asdict, dataclass, fields, replace

import numpy as np

from .errors import ConfigurationError

__all__ = ["RunConfig", "parse_config", "format_config", "load_config", "validate", "SUBCOMMANDS"]

SUBCOMMANDS = ("relax", "propagate", "model", "analyze")
_CHOICES = {
    "solver_kind": ("exact", "meanfield"),
    "precision": ("double", "single"),
    "energy_source": ("auto", "exact", "meanfield"),
    "model_sweep": ("T", "lambda0"),
    "sweep_command": SUBCOMMANDS,
}


@dataclass(frozen=True)
class RunConfig:
    N: int = 2
    lambda0: float = 1.0
    T: float = 0.6
    x_min: float = -8.0
    x_max: float = 120.0
    n_points: int = 2048
    dt: float = 0.005
    t_final: float = 250.0
    snapshot_stride: int = 1000
    absorber_onset: object = "auto"
    absorber_strength: float = 1.0
    absorber_order: int = 4
    interaction_width: float = 0.3
    precision: str = "double"
    solver_kind: str = "exact"
    energy_source: str = "auto"
    inject_interval: float = 0.5
    sector_rank: int = 96
    analysis_time: object = "final"
    correlation_kmax: float = 3.0
    peak_k_floor: float = 0.25
    peak_prominence: float = 0.05
    model_sweep: str = "lambda0"
    sweep_lo: float = 0.0
    sweep_hi: float = 2.0
    sweep_points: int = 21
    sweep_command: str = "propagate"
    output_dir: str = "out"
    deterministic: bool = True

    @property
    def onset(self):
        if self.absorber_onset == "auto":
            return 0.8 * self.x_max
        return float(self.absorber_onset)

    @property
    def t_analysis(self):
        if self.analysis_time == "final":
            return float(self.t_final)
        return float(self.analysis_time)


_TYPES = {f.name: f.type for f in fields(RunConfig)}


def _parse_value(key, text):
    kind = _TYPES[key]
    text = text.strip()
    try:
        if kind is int or kind == "int":
            v = float(text)
            if v != int(v):
                raise ValueError
            return int(v)
        if kind is float or kind == "float":
            return float(text)
        if kind is bool or kind == "bool":
            low = text.lower()
            if low in ("true", "yes", "1"):
                return True
            if low in ("false", "no", "0"):
                return False
            raise ValueError
        if key == "absorber_onset":
            return "auto" if text == "auto" else float(text)
        if key == "analysis_time":
            return "final" if text == "final" else float(text)
        return text
    except ValueError:
        raise ConfigurationError(f"bad value for {key}: {text!r}") from None


def parse_config(text, base=None):
    values = {}
    for lineno, raw in enumerate(text.splitlines(), 1):
        line = raw.strip()
        if not line or line.startswith("#"):
            continue
        if "=" not in line:
            raise ConfigurationError(f"line {lineno}: expected 'key = value'")
        key, value = (s.strip() for s in line.split("=", 1))
        if key not in _TYPES:
            raise ConfigurationError(f"line {lineno}: unknown key {key!r}")
        if key in values:
            raise ConfigurationError(f"line {lineno}: duplicate key {key!r}")
        values[key] = _parse_value(key, value)
    return replace(base or RunConfig(), **values)


def _format_value(v):
    if isinstance(v, bool):
        return "true" if v else "false"
    if isinstance(v, float):
        return repr(v)
    return str(v)


def format_config(cfg):
    return "".join(f"{k} = {_format_value(v)}\n" for k, v in asdict(cfg).items())


def load_config(path):
    try:
        with open(path) as fh:
            return parse_config(fh.read())
    except OSError as exc:
        raise ConfigurationError(f"cannot read config {path}: {exc}") from None


def with_override(cfg, key, value):
    if key not in _TYPES:
        raise ConfigurationError(f"unknown parameter {key!r}")
    if isinstance(value, str):
        value = _parse_value(key, value)
    return replace(cfg, **{key: value})


def validate(cfg, subcommand):
    """Check every precondition that can be checked before computing."""
    from .lattice import make_grid
    from .potential import PotentialSpec
    from .solver.dynamics import Absorber
    from .solver.hamiltonian import ContactInteraction
    from .solver.state import MAX_EXACT_N

    if subcommand not in SUBCOMMANDS:
        raise ConfigurationError(f"unknown subcommand {subcommand!r}")
    for key, allowed in _CHOICES.items():
        if getattr(cfg, key) not in allowed:
            raise ConfigurationError(f"{key} must be one of {allowed}")
    for key in ("lambda0", "T", "x_min", "x_max", "dt", "t_final", "interaction_width",
                "absorber_strength", "sweep_lo", "sweep_hi", "correlation_kmax"):
        if not np.isfinite(getattr(cfg, key)):
            raise ConfigurationError(f"{key} must be finite")
    if cfg.N < 1:
        raise ConfigurationError("N must be at least 1")
    ContactInteraction(cfg.lambda0, cfg.interaction_width)
    spec = PotentialSpec(cfg.T)
    if subcommand == "model":
        if cfg.sweep_points < 2 or not cfg.sweep_hi > cfg.sweep_lo:
            raise ConfigurationError("model sweep needs sweep_hi > sweep_lo and sweep_points >= 2")
        if cfg.model_sweep == "lambda0" and cfg.sweep_lo < 0:
            raise ConfigurationError("lambda0 sweep must stay non-negative")
        if cfg.model_sweep == "T":
            PotentialSpec(cfg.sweep_hi)
        if cfg.energy_source == "exact" and cfg.N > MAX_EXACT_N:
            raise ConfigurationError("exact energy tables stop at N = 3")
        return cfg
    grid = make_grid(cfg.x_min, cfg.x_max, cfg.n_points)
    if cfg.solver_kind == "exact" and cfg.N > MAX_EXACT_N:
        raise ConfigurationError(f"exact solver handles N <= {MAX_EXACT_N}; use solver_kind = meanfield")
    if cfg.solver_kind == "exact" and cfg.n_points ** cfg.N > 2**24:
        raise ConfigurationError("product grid too large for this machine (n_points**N > 2**24)")
    if cfg.solver_kind == "exact":
        from .solver.ground import _WINDOW, _check_width, _window

        _check_width(_window(grid, _WINDOW)[0], cfg.N)
    if subcommand == "relax":
        return cfg
    if not cfg.dt > 0 or not cfg.t_final > 0:
        raise ConfigurationError("dt and t_final must be positive")
    steps = cfg.t_final / cfg.dt
    if abs(steps - round(steps)) > 1e-9 * steps:
        raise ConfigurationError("t_final must be a whole number of time steps")
    if cfg.snapshot_stride < 1:
        raise ConfigurationError("snapshot_stride must be a positive integer")
    if cfg.sector_rank < 1 or not cfg.inject_interval > 0:
        raise ConfigurationError("sector_rank and inject_interval must be positive")
    Absorber(cfg.onset, cfg.absorber_strength, cfg.absorber_order).validate(grid)
    from .solver.dynamics import _stiffness_check

    _stiffness_check(ContactInteraction(cfg.lambda0, cfg.interaction_width), grid, cfg.dt)
    if not grid.x_min < spec.barrier_position < grid.x_max:
        raise ConfigurationError("barrier maximum lies outside the grid")
    if subcommand == "analyze" and not 0 <= cfg.t_analysis <= cfg.t_final:
        raise ConfigurationError("analysis_time must lie in [0, t_final]")
    return cfg
