"""Scenario configuration, validation and derived quantities.

Everything stored here is in SI units and linear power ratios.  Conversion
from per-km² densities and dB values happens once, in :func:`load_config`.
"""
from __future__ import annotations

import dataclasses
import json
import math
from dataclasses import dataclass, fields
from importlib import resources
from pathlib import Path
from typing import Any, Mapping


class ConfigError(ValueError):
    """Raised when a configuration violates one or more invariants."""

    def __init__(self, violations):
        self.violations = list(violations)
        msg = "; ".join(f"{v.field}: {v.message}" for v in self.violations)
        super().__init__(msg or "invalid configuration")


@dataclass(frozen=True)
class Violation:
    field: str
    message: str


@dataclass(frozen=True)
class ScenarioConfig:
    lambda_b: float = 1e-5
    lambda_u: float = 1e-4
    lambda_l: float = 5e-4
    mu: float = 0.6
    blockage_len: float = 15.0
    alpha: float = 4.0
    gamma: float = 0.85
    m_b: int = 16
    m_r: int = 16
    m_u: int = 4
    k_b: float = 0.02
    k_u: float = 0.08
    frame_len: float = 4480.0
    beta: float = 1.0
    snr: float = 10 ** 1.6
    p_b: float = 10.0
    p_r: float = 10 ** 1.5 * 1e-3
    n0: float = 1e-9
    tau: float = 10 ** 0.3

    def replace(self, **changes) -> "ScenarioConfig":
        return dataclasses.replace(self, **changes)

    def to_dict(self) -> dict:
        return dataclasses.asdict(self)


FIELD_NAMES = tuple(f.name for f in fields(ScenarioConfig))
INT_FIELDS = ("m_b", "m_r", "m_u")


@dataclass(frozen=True)
class DerivedParams:
    eta: float
    lambda_r: float
    theta_b: float
    theta_u: float
    n_b: float
    n_u: float
    sigma_e2: float
    sigma_b2: float
    sigma_u2: float
    t_e: float
    t_d: float
    beta_max: float


def pilot_paths(cfg: ScenarioConfig) -> int:
    """Number of antenna/element paths that each need `beta` pilot symbols."""
    return cfg.m_b * cfg.m_r * cfg.m_u + cfg.m_b * cfg.m_u


def beta_upper_bound(cfg: ScenarioConfig) -> float:
    return cfg.frame_len / pilot_paths(cfg)


def validate_config(cfg: ScenarioConfig) -> list[Violation]:
    """Return the list of violated invariants; empty means valid."""
    out = []

    def bad(name, msg):
        out.append(Violation(name, msg))

    for name in FIELD_NAMES:
        v = getattr(cfg, name)
        if isinstance(v, bool) or not isinstance(v, (int, float)):
            bad(name, "must be a number")
        elif not math.isfinite(v):
            bad(name, "must be finite")
    if out:
        return out

    for name in ("lambda_b", "lambda_u", "lambda_l", "blockage_len", "p_b", "p_r",
                 "n0", "snr", "tau", "frame_len"):
        if getattr(cfg, name) <= 0:
            bad(name, "must be positive")
    if not 0 <= cfg.mu <= 1:
        bad("mu", "must lie in [0, 1]")
    if not 0 < cfg.gamma <= 1:
        bad("gamma", "must lie in (0, 1]")
    for name in ("k_b", "k_u"):
        if not 0 < getattr(cfg, name) <= 1:
            bad(name, "must lie in (0, 1]")
    if cfg.alpha <= 2:
        bad("alpha", "must exceed 2")
    for name in INT_FIELDS:
        v = getattr(cfg, name)
        if v != int(v) or v < 1:
            bad(name, "must be a positive integer")
    if any(v.field in INT_FIELDS + ("frame_len",) for v in out):
        return out
    if cfg.beta < 0:
        bad("beta", "must be nonnegative")
    elif cfg.beta >= beta_upper_bound(cfg):
        bad("beta", "beta out of feasible range")
    return out


def check_config(cfg: ScenarioConfig) -> ScenarioConfig:
    errs = validate_config(cfg)
    if errs:
        raise ConfigError(errs)
    return cfg


def derive_params(cfg: ScenarioConfig) -> DerivedParams:
    eta = 2.0 * cfg.blockage_len * cfg.lambda_l / math.pi
    theta_b = 4.0 / cfg.m_b
    theta_u = 4.0 / cfg.m_u
    sigma_e2 = 1.0 / (1.0 + cfg.beta * cfg.snr)
    paths = pilot_paths(cfg)
    t_e = cfg.beta * paths
    return DerivedParams(
        eta=eta,
        lambda_r=cfg.mu * cfg.lambda_l,
        theta_b=theta_b,
        theta_u=theta_u,
        n_b=2.0 * math.pi / theta_b,
        n_u=2.0 * math.pi / theta_u,
        sigma_e2=sigma_e2,
        sigma_b2=cfg.k_b * math.pi ** 2 * sigma_e2,
        sigma_u2=cfg.k_u * math.pi ** 2 * sigma_e2,
        t_e=t_e,
        t_d=cfg.frame_len - t_e,
        beta_max=cfg.frame_len / paths,
    )


# unit conversions applied while loading a config file
_UNIT_CONVERTERS = {
    "linear": lambda v: v,
    "si": lambda v: v,
    "per_m2": lambda v: v,
    "W": lambda v: v,
    "per_km2": lambda v: v * 1e-6,
    "dB": lambda v: 10.0 ** (v / 10.0),
    "dBm": lambda v: 10.0 ** (v / 10.0) * 1e-3,
    "dBW": lambda v: 10.0 ** (v / 10.0),
}


def convert_value(value: float, unit: str) -> float:
    try:
        conv = _UNIT_CONVERTERS[unit]
    except KeyError:
        raise ConfigError([Violation("units", f"unknown unit {unit!r}")]) from None
    return conv(float(value))


def config_from_mapping(data: Mapping[str, Any], units: Mapping[str, str] | None = None,
                        base: ScenarioConfig | None = None) -> ScenarioConfig:
    """Build a config from raw values, converting fields listed in `units`."""
    units = dict(units or {})
    unknown = [k for k in list(data) + list(units) if k not in FIELD_NAMES]
    if unknown:
        raise ConfigError([Violation(k, "unknown field") for k in sorted(set(unknown))])
    kw = {}
    for k, v in data.items():
        try:
            val = convert_value(v, units.get(k, "linear"))
        except (TypeError, ValueError) as exc:
            if isinstance(exc, ConfigError):
                raise
            raise ConfigError([Violation(k, f"not a number: {v!r}")]) from None
        if k in INT_FIELDS and val == int(val):
            val = int(val)
        kw[k] = val
    return (base or ScenarioConfig()).replace(**kw)


def read_config_file(path) -> tuple[dict, dict]:
    """Return (values, units) from a JSON config file."""
    with open(path, encoding="utf-8") as fh:
        raw = json.load(fh)
    if not isinstance(raw, dict):
        raise ConfigError([Violation("config", "top level must be an object")])
    units = raw.pop("units", {}) or {}
    return raw, units


def load_config(path=None, overrides: Mapping[str, Any] | None = None) -> ScenarioConfig:
    """Load a JSON config (Table-1 defaults when `path` is None).

    Overrides are interpreted in the units declared by the file, so
    ``{"snr": 20}`` means 20 dB when the file marks ``snr`` as dB.
    """
    if path is None:
        text = resources.files("ris_stogeo.data").joinpath("defaults.json").read_text()
        raw = json.loads(text)
        units = raw.pop("units")
    else:
        raw, units = read_config_file(Path(path))
    raw.update(overrides or {})
    return check_config(config_from_mapping(raw, units))


def default_config() -> ScenarioConfig:
    return load_config()
