"""Declarative experiment configuration: one INI section, CLI overrides.

Every experiment is reproducible from the file alone; the serialized
canonical form is hashed into result headers for provenance.
"""

from __future__ import annotations

import configparser
import hashlib
import io
from dataclasses import dataclass, fields, replace

KINDS = ("coeffs", "converge", "stability", "run")
FAMILIES = ("cg", "ipdg", "ndg")


class ConfigError(ValueError):
    """Invalid experiment configuration (CLI exit code 2)."""


@dataclass(frozen=True)
class ExperimentConfig:
    kind: str
    family: tuple = ("cg",)
    l: int = 0                      # 0 means "k - 1"
    k: tuple = (2,)
    p: tuple = (2,)
    sigma: tuple = (0.1,)
    c: float = 1.0
    domain: tuple = (0.0, 6.0)
    fine_region: tuple = (2.0, 4.0)
    h: tuple = ()
    dt_rule: tuple = ("frac_of_ab", 1.0)
    T: float = 10.0
    startup: str = "exact"
    alpha: float = 0.0              # 0 means the per-degree default
    bc: str = "dirichlet"
    interface: str = "fine"
    flux: str = "upwind"
    tol_rel: float = 1e-3
    max_workers: int = 2
    seed: int = 0
    series: str = "error"           # "error" | "state": time-series payload

    def l_for(self, k):
        return self.l if self.l > 0 else k - 1

    def alpha_or_none(self):
        return self.alpha if self.alpha > 0 else None


_INT_TUPLES = {"k", "p"}
_FLOAT_TUPLES = {"sigma", "domain", "fine_region", "h"}
_STR_TUPLES = {"family"}
_INTS = {"l", "max_workers", "seed"}
_FLOATS = {"c", "T", "alpha", "tol_rel"}


def _parse_value(name, text):
    text = text.strip()
    try:
        if name in _STR_TUPLES:
            return tuple(text.split())
        if name in _INT_TUPLES:
            return tuple(int(v) for v in text.split())
        if name in _FLOAT_TUPLES:
            return tuple(float(v) for v in text.split())
        if name in _INTS:
            return int(text)
        if name in _FLOATS:
            return float(text)
        if name == "dt_rule":
            parts = text.split()
            if len(parts) != 2 or parts[0] not in ("frac_of_ab", "fixed"):
                raise ValueError
            return (parts[0], float(parts[1]))
        return text
    except ValueError:
        raise ConfigError(f"field {name!r}: cannot parse value {text!r}") from None


def _format_value(name, value):
    if isinstance(value, tuple):
        if name == "dt_rule":
            return f"{value[0]} {value[1]!r}"
        return " ".join(repr(v) if isinstance(v, float) else str(v) for v in value)
    if isinstance(value, float):
        return repr(value)
    return str(value)


def validate(cfg):
    if cfg.kind not in KINDS:
        raise ConfigError(f"field 'kind': must be one of {KINDS}, got {cfg.kind!r}")
    for fam in cfg.family:
        if fam not in FAMILIES:
            raise ConfigError(f"field 'family': unknown family {fam!r}")
    for k in cfg.k:
        if not 1 <= k <= 20:
            raise ConfigError(f"field 'k': {k} outside [1, 20]")
    for p in cfg.p:
        if p < 1:
            raise ConfigError(f"field 'p': {p} must be >= 1")
    if cfg.l and cfg.l not in (1, 2, 3):
        raise ConfigError(f"field 'l': {cfg.l} not in (1, 2, 3)")
    if cfg.startup not in ("exact", "rk4"):
        raise ConfigError(f"field 'startup': {cfg.startup!r}")
    if cfg.bc not in ("dirichlet", "neumann"):
        raise ConfigError(f"field 'bc': {cfg.bc!r}")
    if cfg.interface not in ("fine", "coarse"):
        raise ConfigError(f"field 'interface': {cfg.interface!r}")
    if cfg.flux not in ("upwind", "central"):
        raise ConfigError(f"field 'flux': {cfg.flux!r}")
    if cfg.kind in ("converge", "run") and not cfg.h:
        raise ConfigError("field 'h': mesh sizes are required for this experiment")
    if cfg.series not in ("error", "state"):
        raise ConfigError(f"field 'series': {cfg.series!r}")
    if any(s < 0 for s in cfg.sigma):
        raise ConfigError("field 'sigma': damping must be non-negative")
    return cfg


def parse(text):
    parser = configparser.ConfigParser()
    parser.optionxform = str          # keep key case (the T field)
    try:
        parser.read_string(text)
    except configparser.Error as exc:
        raise ConfigError(f"malformed config: {exc}") from None
    if "experiment" not in parser:
        raise ConfigError("missing [experiment] section")
    section = parser["experiment"]
    known = {f.name for f in fields(ExperimentConfig)}
    values = {}
    for name, raw in section.items():
        if name not in known:
            raise ConfigError(f"unknown field {name!r} in [experiment]")
        if raw.strip():
            values[name] = _parse_value(name, raw)
    if "kind" not in values:
        raise ConfigError("field 'kind' is required")
    return validate(ExperimentConfig(**values))


def load(path):
    try:
        with open(path) as f:
            return parse(f.read())
    except OSError as exc:
        raise ConfigError(f"cannot read config {path}: {exc}") from None


def serialize(cfg):
    out = io.StringIO()
    out.write("[experiment]\n")
    for f in fields(ExperimentConfig):
        out.write(f"{f.name} = {_format_value(f.name, getattr(cfg, f.name))}\n")
    return out.getvalue()


def apply_overrides(cfg, pairs):
    """Apply key=value CLI overrides on top of a parsed config."""
    updates = {}
    for pair in pairs:
        if "=" not in pair:
            raise ConfigError(f"override {pair!r} is not of the form key=value")
        name, _, raw = pair.partition("=")
        name = name.strip()
        if name not in {f.name for f in fields(ExperimentConfig)}:
            raise ConfigError(f"unknown config field {name!r}")
        updates[name] = _parse_value(name, raw)
    return validate(replace(cfg, **updates))


def config_hash(cfg):
    return hashlib.sha256(serialize(cfg).encode()).hexdigest()[:16]
