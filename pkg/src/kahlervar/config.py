"""Scenario configuration: a single JSON document, validated before any numerics run."""

from __future__ import annotations

import json
from dataclasses import dataclass, field
from pathlib import Path

import numpy as np

from .spectral_fields import ContractViolation, FourierSpec, TorusGrid

MAX_AMPLITUDE = 0.1

DEFAULT_TOLERANCES = {
    "identities": 1e-7,
    "variations": 1e-4,
    "min_order": 1.9,
    "cross": 1e-7,
    "flow_start": 1e-3,
    "flow_mid": 1e-2,
    "homothety": 1e-10,
    "j_invariants": 1e-9,
    "constraint_growth": 10.0,
    "constraint_start": 1e-8,
    "structure": 1e-8,
    "kahler_form_rate": 1e-9,
}

VARIATION_KINDS = ("potentials", "flat_hessian", "projected", "zero")


class ConfigError(ValueError):
    """The configuration document does not satisfy the schema."""


@dataclass
class VariationSource:
    name: str
    kind: str
    u: FourierSpec = FourierSpec()
    w: FourierSpec = FourierSpec()
    c: float = 0.0
    amp: float = 0.02
    max_mode: int = 2


@dataclass
class FlowConfig:
    dt: float = 1e-4
    steps: int = 100
    sign: int = 1
    check_stability: bool = True
    export_every: int = 10
    check_indices: tuple = ()


@dataclass
class ScenarioConfig:
    n: int
    resolution: int
    phi: FourierSpec = FourierSpec()
    h: FourierSpec = FourierSpec()
    variations: list = field(default_factory=list)
    ladder: tuple = (1e-2, 5e-3, 2.5e-3)
    flow: FlowConfig = field(default_factory=FlowConfig)
    seed: int = 0
    tolerances: dict = field(default_factory=lambda: dict(DEFAULT_TOLERANCES))
    out: str | None = None
    raw: dict = field(default_factory=dict)

    @property
    def grid(self) -> TorusGrid:
        return TorusGrid(self.n, self.resolution)

    def rng(self) -> np.random.Generator:
        return np.random.default_rng(self.seed)


def _spec(doc, key: str, grid: TorusGrid, where: str) -> FourierSpec:
    items = doc.get(key, [])
    if not isinstance(items, list):
        raise ConfigError(f"{where}.{key} must be a list of Fourier terms")
    try:
        spec = FourierSpec.from_list(items)
        spec.check(grid)
    except (ContractViolation, KeyError, TypeError, ValueError) as exc:
        raise ConfigError(f"{where}.{key}: {exc}") from exc
    for _, amp, _ in spec.terms:
        if abs(amp) > MAX_AMPLITUDE:
            raise ConfigError(f"{where}.{key}: amplitude {amp} exceeds {MAX_AMPLITUDE}")
    return spec


def _number(doc, key, kind, default, where, positive=False):
    val = doc.get(key, default)
    if isinstance(val, bool) or not isinstance(val, (int, float)) or (kind is int and not isinstance(val, int)):
        raise ConfigError(f"{where}.{key} must be {'an integer' if kind is int else 'a number'}")
    if positive and val <= 0:
        raise ConfigError(f"{where}.{key} must be positive")
    return kind(val)


_TOP_KEYS = {"n", "resolution", "phi", "h", "variations", "ladder", "flow", "seed", "tolerances", "out", "comment"}


def parse_config(doc: dict) -> ScenarioConfig:
    if not isinstance(doc, dict):
        raise ConfigError("configuration must be a JSON object")
    unknown = set(doc) - _TOP_KEYS
    if unknown:
        raise ConfigError(f"unknown keys: {sorted(unknown)}")
    n = _number(doc, "n", int, None, "config", positive=True) if "n" in doc else None
    if n not in (1, 2):
        raise ConfigError("config.n must be 1 or 2")
    res = _number(doc, "resolution", int, 32, "config", positive=True)
    try:
        grid = TorusGrid(n, res)
    except ContractViolation as exc:
        raise ConfigError(f"config.resolution: {exc}") from exc
    cfg = ScenarioConfig(n=n, resolution=res, raw=doc)
    cfg.phi = _spec(doc, "phi", grid, "config")
    cfg.h = _spec(doc, "h", grid, "config")
    cfg.seed = _number(doc, "seed", int, 0, "config")
    ladder = doc.get("ladder", list(cfg.ladder))
    if (not isinstance(ladder, list) or len(ladder) != 3
            or not all(isinstance(e, (int, float)) and e > 0 for e in ladder)):
        raise ConfigError("config.ladder must be three positive step sizes")
    cfg.ladder = tuple(float(e) for e in ladder)
    tol = doc.get("tolerances", {})
    if not isinstance(tol, dict) or set(tol) - set(DEFAULT_TOLERANCES):
        raise ConfigError(f"config.tolerances accepts only {sorted(DEFAULT_TOLERANCES)}")
    for k in tol:
        cfg.tolerances[k] = _number(tol, k, float, None, "config.tolerances", positive=True)
    names = set()
    for i, v in enumerate(doc.get("variations", [])):
        where = f"config.variations[{i}]"
        if not isinstance(v, dict):
            raise ConfigError(f"{where} must be an object")
        kind = v.get("kind")
        if kind not in VARIATION_KINDS:
            raise ConfigError(f"{where}.kind must be one of {VARIATION_KINDS}")
        name = str(v.get("name", f"{kind}{i}"))
        if name in names:
            raise ConfigError(f"{where}.name {name!r} is repeated")
        names.add(name)
        src = VariationSource(name=name, kind=kind, u=_spec(v, "u", grid, where), w=_spec(v, "w", grid, where),
                              c=_number(v, "c", float, 0.0, where),
                              amp=_number(v, "amp", float, 0.02, where, positive=True),
                              max_mode=_number(v, "max_mode", int, 2, where, positive=True))
        if src.amp > MAX_AMPLITUDE:
            raise ConfigError(f"{where}.amp exceeds {MAX_AMPLITUDE}")
        if src.max_mode > grid.band_limit:
            raise ConfigError(f"{where}.max_mode exceeds the band limit {grid.band_limit}")
        cfg.variations.append(src)
    fl = doc.get("flow", {})
    if not isinstance(fl, dict):
        raise ConfigError("config.flow must be an object")
    sign = fl.get("sign", 1)
    if sign not in (1, -1):
        raise ConfigError("config.flow.sign must be 1 or -1")
    idx = fl.get("check_indices", [])
    if not isinstance(idx, list) or not all(isinstance(k, int) and k >= 0 for k in idx):
        raise ConfigError("config.flow.check_indices must be non-negative integers")
    check = fl.get("check_stability", True)
    if not isinstance(check, bool):
        raise ConfigError("config.flow.check_stability must be a boolean")
    cfg.flow = FlowConfig(dt=_number(fl, "dt", float, 1e-4, "config.flow", positive=True),
                          steps=_number(fl, "steps", int, 100, "config.flow", positive=True),
                          sign=sign, check_stability=check,
                          export_every=_number(fl, "export_every", int, 10, "config.flow", positive=True),
                          check_indices=tuple(idx))
    out = doc.get("out")
    if out is not None and not isinstance(out, str):
        raise ConfigError("config.out must be a path string")
    cfg.out = out
    return cfg


def load_config(path) -> ScenarioConfig:
    try:
        doc = json.loads(Path(path).read_text())
    except FileNotFoundError as exc:
        raise ConfigError(f"config file not found: {path}") from exc
    except json.JSONDecodeError as exc:
        raise ConfigError(f"config is not valid JSON: {exc}") from exc
    return parse_config(doc)
