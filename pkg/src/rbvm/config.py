"""Experiment configuration: flat ``section.key = value`` text files.

Example::

    model = linear
    d = 1
    D = 16
    psi.count = 2
    psi.1.coeffs = 1, 0
    psi.2.coeffs = 0, 1
    mcmc.steps = 20000
    cred.case = 1
"""
from __future__ import annotations

import re
from dataclasses import dataclass, field, fields, replace
from typing import Any, Mapping

from .forward import VARIANTS


class ConfigError(ValueError):
    """Malformed or invalid experiment configuration."""


@dataclass(frozen=True)
class PsiSpec:
    kind: str = "coeffs"
    coeffs: tuple = (1.0,)
    center: tuple = (0.5,)
    width: float = 0.25


@dataclass(frozen=True)
class ExperimentConfig:
    model: str = "linear"
    d: int = 1
    D: int = 16
    alpha: int = 2
    sigma0: float = 1.0
    N: int = 1000
    seed: int = 0
    grid_m: int = 0
    darcy_f: float = 1.0
    darcy_g: float = 0.0
    schrodinger_g: float = 1.0
    theta0_kind: str = "coeffs"
    theta0_coeffs: tuple = (0.0,)
    theta0_center: tuple = (0.5,)
    theta0_width: float = 0.25
    psis: tuple = field(default_factory=lambda: (PsiSpec(),))
    mcmc_steps: int = 20000
    mcmc_burnin: int = 5000
    mcmc_beta: float = 0.2
    cred_level: float = 0.9
    cred_case: int = 1
    replicates: int = 100

    def __post_init__(self):
        problems = []
        if self.model not in VARIANTS:
            problems.append(f"model must be one of {VARIANTS}")
        if self.d not in (1, 2):
            problems.append("d must be 1 or 2")
        if self.D < 1:
            problems.append("D must be positive")
        if not self.alpha > 1 + self.d / 2:
            problems.append("alpha must exceed 1 + d/2")
        if not self.sigma0 > 0:
            problems.append("sigma0 must be positive")
        if self.N < 0:
            problems.append("N must be non-negative")
        if self.grid_m < 0:
            problems.append("grid.m must be non-negative (0 selects the Nyquist-safe default)")
        if self.theta0_kind not in ("coeffs", "zero", "bump"):
            problems.append("theta0.kind must be coeffs, zero or bump")
        for i, p in enumerate(self.psis, 1):
            if p.kind not in ("coeffs", "bump"):
                problems.append(f"psi.{i}.kind must be coeffs or bump")
        if not self.psis:
            problems.append("at least one functional is required")
        if self.mcmc_steps <= self.mcmc_burnin or self.mcmc_burnin < 0:
            problems.append("mcmc.steps must exceed mcmc.burnin >= 0")
        if not 0 < self.mcmc_beta <= 1:
            problems.append("mcmc.beta must lie in (0, 1]")
        if not 0 < self.cred_level < 1:
            problems.append("cred.level must lie in (0, 1)")
        if self.cred_case not in (1, 2):
            problems.append("cred.case must be 1 or 2")
        if self.replicates < 1:
            problems.append("coverage.replicates must be at least 1")
        if problems:
            raise ConfigError("; ".join(problems))

    @property
    def k(self) -> int:
        return len(self.psis)

    @property
    def draws(self) -> int:
        """Retained posterior draws per fit (MCMC or exact)."""
        return self.mcmc_steps - self.mcmc_burnin

    def with_overrides(self, **kw) -> "ExperimentConfig":
        return replace(self, **kw)


_SCALAR_KEYS = {
    "model": ("model", str),
    "d": ("d", int),
    "D": ("D", int),
    "alpha": ("alpha", int),
    "sigma0": ("sigma0", float),
    "N": ("N", int),
    "seed": ("seed", int),
    "grid.m": ("grid_m", int),
    "darcy.f": ("darcy_f", float),
    "darcy.g": ("darcy_g", float),
    "schrodinger.g": ("schrodinger_g", float),
    "theta0.kind": ("theta0_kind", str),
    "theta0.coeffs": ("theta0_coeffs", tuple),
    "theta0.center": ("theta0_center", tuple),
    "theta0.width": ("theta0_width", float),
    "mcmc.steps": ("mcmc_steps", int),
    "mcmc.burnin": ("mcmc_burnin", int),
    "mcmc.beta": ("mcmc_beta", float),
    "cred.level": ("cred_level", float),
    "cred.case": ("cred_case", int),
    "coverage.replicates": ("replicates", int),
}
_PSI_KEYS = {"kind": str, "coeffs": tuple, "center": tuple, "width": float}
_PSI_RE = re.compile(r"^psi\.(\d+)\.(\w+)$")


def _convert(key: str, raw: Any, kind):
    try:
        if kind is tuple:
            if isinstance(raw, (list, tuple)):
                return tuple(float(v) for v in raw)
            parts = [p for p in str(raw).replace(",", " ").split()]
            return tuple(float(p) for p in parts)
        if kind is int:
            if isinstance(raw, bool):
                raise ValueError
            if isinstance(raw, int):
                return raw
            try:
                return int(str(raw).strip())
            except ValueError:
                value = float(raw)
            if not value.is_integer():
                raise ValueError
            return int(value)
        if kind is float:
            return float(raw)
        return str(raw).strip()
    except (TypeError, ValueError):
        raise ConfigError(f"invalid value {raw!r} for key {key!r}") from None


def from_mapping(items: Mapping[str, Any]) -> ExperimentConfig:
    """Build a config from a flat key/value mapping; unknown keys are rejected."""
    kw: dict[str, Any] = {}
    psi_count = None
    psi_fields: dict[int, dict[str, Any]] = {}
    for key, raw in items.items():
        if key in _SCALAR_KEYS:
            name, kind = _SCALAR_KEYS[key]
            kw[name] = _convert(key, raw, kind)
        elif key == "psi.count":
            psi_count = _convert(key, raw, int)
        else:
            m = _PSI_RE.match(key)
            if not m or m.group(2) not in _PSI_KEYS:
                raise ConfigError(f"unknown config key {key!r}")
            i = int(m.group(1))
            psi_fields.setdefault(i, {})[m.group(2)] = _convert(key, raw, _PSI_KEYS[m.group(2)])
    if psi_fields or psi_count is not None:
        count = psi_count if psi_count is not None else max(psi_fields)
        if count < 1:
            raise ConfigError("psi.count must be at least 1")
        bad = [i for i in psi_fields if not 1 <= i <= count]
        if bad:
            raise ConfigError(f"functional index {bad[0]} outside 1..{count}")
        kw["psis"] = tuple(PsiSpec(**psi_fields.get(i, {})) for i in range(1, count + 1))
    try:
        return ExperimentConfig(**kw)
    except TypeError as exc:
        raise ConfigError(str(exc)) from None


def parse_text(text: str) -> ExperimentConfig:
    items: dict[str, str] = {}
    for lineno, line in enumerate(text.splitlines(), 1):
        line = line.split("#", 1)[0].strip()
        if not line:
            continue
        if "=" not in line:
            raise ConfigError(f"line {lineno}: expected 'key = value'")
        key, value = (s.strip() for s in line.split("=", 1))
        if key in items:
            raise ConfigError(f"line {lineno}: duplicate key {key!r}")
        items[key] = value
    return from_mapping(items)


def load(path) -> ExperimentConfig:
    with open(path, encoding="utf-8") as fh:
        return parse_text(fh.read())


def to_mapping(cfg: ExperimentConfig) -> dict[str, Any]:
    """Flat typed mapping that :func:`from_mapping` turns back into ``cfg``."""
    out: dict[str, Any] = {}
    for key, (name, kind) in _SCALAR_KEYS.items():
        value = getattr(cfg, name)
        out[key] = list(value) if kind is tuple else value
    out["psi.count"] = cfg.k
    for i, p in enumerate(cfg.psis, 1):
        for f in fields(PsiSpec):
            v = getattr(p, f.name)
            out[f"psi.{i}.{f.name}"] = list(v) if isinstance(v, tuple) else v
    return out


def to_text(cfg: ExperimentConfig) -> str:
    lines = []
    for key, value in to_mapping(cfg).items():
        if isinstance(value, list):
            value = ", ".join(repr(float(v)) for v in value)
        lines.append(f"{key} = {value}")
    return "\n".join(lines) + "\n"
