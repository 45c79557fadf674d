"""Run configuration: dataclasses plus a lossless INI round-trip."""
from __future__ import annotations

import configparser
import dataclasses
import io
from dataclasses import dataclass, field

from .dynamics import BS_MODES, MODES
from .farfield import LATTICES
from .model import ConfigError, ModelParams

SWEEP_VARIABLES = ("beta_deg", "bragg")


@dataclass(frozen=True)
class DriveConfig:
    pump_rate: float = 0.01
    beta_exc_deg: float = 0.0


@dataclass(frozen=True)
class SweepSpec:
    """Angle sweep plus the lattice-constant sweep used by the pattern command.

    For the spectrum and extraction commands ``variable='bragg'`` replaces the
    linear beta grid by the Bragg-allowed directions of the single-excitation
    line.  The pattern command always uses the linear grid.
    """

    variable: str = "bragg"
    start: float = -90.0
    stop: float = 90.0
    steps: int = 721
    lambda_start: float = 0.1
    lambda_stop: float = 1.0
    lambda_steps: int = 10


@dataclass(frozen=True)
class ModeFlags:
    mode: str = "approx"
    bs: str = "tight"
    lattice: str = "ideal"


@dataclass(frozen=True)
class RunSettings:
    K: float = 0.0  # centre-of-mass momentum for pattern/decay (units 1/a)
    t_end: float = 10.0
    dt: float = 0.01
    samples: int = 101
    t_ret: float = 0.0
    pattern3d: bool = False
    seed: int | None = None
    threads: int = 1


@dataclass(frozen=True)
class RunConfig:
    model: ModelParams = field(default_factory=ModelParams)
    drive: DriveConfig = field(default_factory=DriveConfig)
    sweep: SweepSpec = field(default_factory=SweepSpec)
    modes: ModeFlags = field(default_factory=ModeFlags)
    run: RunSettings = field(default_factory=RunSettings)
    out: str | None = None

    def __post_init__(self):
        m = self.modes
        if m.mode not in MODES:
            raise ConfigError(f"mode must be one of {MODES}, got {m.mode!r}")
        if m.bs not in BS_MODES:
            raise ConfigError(f"bs must be one of {BS_MODES}, got {m.bs!r}")
        if m.lattice not in LATTICES:
            raise ConfigError(f"lattice must be one of {LATTICES}, got {m.lattice!r}")
        s = self.sweep
        if s.variable not in SWEEP_VARIABLES:
            raise ConfigError(f"sweep variable must be one of {SWEEP_VARIABLES}")
        if s.steps < 1 or s.lambda_steps < 1:
            raise ConfigError("sweep ranges must be non-empty")
        if s.lambda_start <= 0 or s.lambda_stop <= 0:
            raise ConfigError("lambda/a sweep must be positive")
        if self.run.dt <= 0 or self.run.t_end < 0 or self.run.samples < 1:
            raise ConfigError("invalid time grid")
        if self.run.threads < 1:
            raise ConfigError("threads must be >= 1")

    def replace(self, **changes) -> "RunConfig":
        return dataclasses.replace(self, **changes)

    def with_modes(self, **flags) -> "RunConfig":
        flags = {k: v for k, v in flags.items() if v is not None}
        return self.replace(modes=dataclasses.replace(self.modes, **flags))


_SECTIONS = {"model": ModelParams, "drive": DriveConfig, "sweep": SweepSpec, "modes": ModeFlags, "run": RunSettings}


def _format(value) -> str:
    if value is None:
        return "none"
    if isinstance(value, bool):
        return "true" if value else "false"
    if isinstance(value, complex):
        return f"{value.real!r},{value.imag!r}"
    if isinstance(value, float):
        return repr(value)
    return str(value)


def _parse(text: str, default, name: str):
    text = text.strip()
    if text.lower() == "none":
        return None
    try:
        if isinstance(default, bool):
            if text.lower() not in ("true", "false"):
                raise ValueError(text)
            return text.lower() == "true"
        if name == "gamma1":
            re, im = text.split(",")
            return complex(float(re), float(im))
        if isinstance(default, int) or name in ("seed",):
            return int(text)
        if isinstance(default, float):
            return float(text)
    except ValueError as exc:
        raise ConfigError(f"cannot parse {name} = {text!r}") from exc
    return text


def to_ini(config: RunConfig) -> str:
    cp = configparser.ConfigParser(interpolation=None)
    cp.optionxform = str
    for section, cls in _SECTIONS.items():
        obj = getattr(config, section)
        cp[section] = {f.name: _format(getattr(obj, f.name)) for f in dataclasses.fields(cls)}
    cp["output"] = {"out": _format(config.out)}
    buf = io.StringIO()
    cp.write(buf)
    return buf.getvalue()


def from_ini(text: str) -> RunConfig:
    cp = configparser.ConfigParser(interpolation=None)
    cp.optionxform = str
    try:
        cp.read_string(text)
    except configparser.Error as exc:
        raise ConfigError(f"malformed config: {exc}") from exc
    unknown = set(cp.sections()) - set(_SECTIONS) - {"output"}
    if unknown:
        raise ConfigError(f"unknown sections {sorted(unknown)}")
    parts = {}
    for section, cls in _SECTIONS.items():
        fields = {f.name: f for f in dataclasses.fields(cls)}
        defaults = cls()
        values = {}
        if cp.has_section(section):
            for key, raw in cp[section].items():
                if key not in fields:
                    raise ConfigError(f"unknown key {section}.{key}")
                values[key] = _parse(raw, getattr(defaults, key), key)
        parts[section] = cls(**values)
    out = None
    if cp.has_section("output"):
        extra = set(cp["output"]) - {"out"}
        if extra:
            raise ConfigError(f"unknown keys in [output]: {sorted(extra)}")
        raw = cp["output"].get("out", "none")
        out = None if raw.strip().lower() == "none" else raw.strip()
    return RunConfig(out=out, **parts)


def load_config(path: str) -> RunConfig:
    with open(path, encoding="utf-8") as fh:
        return from_ini(fh.read())


def save_config(config: RunConfig, path: str) -> None:
    with open(path, "w", encoding="utf-8") as fh:
        fh.write(to_ini(config))
