"""Experiment configuration: JSON files with CLI overrides.

Schema (all keys optional except ``name``)::

    {
      "name": "inequalities" | "kernel" | "counterexample" | "mesh" | "solve" | "norms",
      "domain": "square" | "lshape" | {"sawtooth": k} | {"polygon": "path/to/file"},
      "order": 1 | 2,
      "h": 0 < h <= 1,
      "grading": 0 < gamma <= 1,
      "s_values": [s, ...]              each in [0, 1],
      "k_list": [k, ...]                ascending positive integers,
      "quad_levels": 0..4,
      "n_random": 1..200,
      "seed": int >= 0,
      "out": "output directory",
      "checks": [names] or null,
      "rhs": "one" | "sinsin",
      "record_timing": false,
      "parallel": false
    }
"""

from __future__ import annotations

import json
from dataclasses import asdict, dataclass, fields, replace
from pathlib import Path

from ..errors import ConfigError
from ..geometry import Domain, lshape, make_sawtooth, read_polygon, unit_square

EXPERIMENTS = ("inequalities", "kernel", "counterexample", "mesh", "solve", "norms")

_DEFAULTS = {
    "inequalities": dict(domain="square", h=0.25, s_values=[0.25, 0.5, 0.75]),
    "kernel": dict(domain="lshape", h=0.25, s_values=[-0.5, -0.25, 0.0, 0.25, 0.5, 1.0, 2.0]),
    "counterexample": dict(domain={"sawtooth": 2}, k_list=[2, 4, 8]),
}


@dataclass(frozen=True)
class ExperimentConfig:
    name: str
    domain: object = "square"
    order: int = 1
    h: float = 0.25
    grading: float = 1.0
    s_values: tuple = (0.25, 0.5, 0.75)
    k_list: tuple = (2, 4, 8)
    quad_levels: int = 0
    n_random: int = 20
    seed: int = 0
    out: str = "lab_out"
    checks: tuple | None = None
    rhs: str = "one"
    record_timing: bool = False
    parallel: bool = False

    def __post_init__(self):
        validate(self)

    def echo(self) -> dict:
        d = asdict(self)
        for k in ("s_values", "k_list", "checks"):
            if d[k] is not None:
                d[k] = list(d[k])
        return d

    def build_domain(self) -> Domain:
        dom = self.domain
        if dom == "square":
            return unit_square()
        if dom == "lshape":
            return lshape()
        if isinstance(dom, dict) and "sawtooth" in dom:
            return make_sawtooth(int(dom["sawtooth"]))
        if isinstance(dom, dict) and "polygon" in dom:
            try:
                return read_polygon(dom["polygon"])
            except (OSError, ValueError, IndexError) as e:
                raise ConfigError(f"cannot read polygon {dom['polygon']}: {e}") from e
        raise ConfigError(f"unknown domain {dom!r}")

    def domain_label(self) -> str:
        dom = self.domain
        if isinstance(dom, str):
            return dom
        if "sawtooth" in dom:
            return f"sawtooth{int(dom['sawtooth'])}"
        return Path(dom["polygon"]).stem


def validate(c: ExperimentConfig) -> None:
    if c.name not in EXPERIMENTS:
        raise ConfigError(f"unknown experiment {c.name!r}; expected one of {EXPERIMENTS}")
    dom = c.domain
    if isinstance(dom, str):
        if dom not in ("square", "lshape"):
            raise ConfigError(f"unknown builtin domain {dom!r}")
    elif isinstance(dom, dict) and len(dom) == 1 and "sawtooth" in dom:
        k = dom["sawtooth"]
        if not isinstance(k, int) or isinstance(k, bool) or k < 1:
            raise ConfigError(f"sawtooth k must be a positive integer, got {k!r}")
    elif isinstance(dom, dict) and len(dom) == 1 and "polygon" in dom:
        if not isinstance(dom["polygon"], str):
            raise ConfigError("polygon domain needs a file path")
    else:
        raise ConfigError(f"bad domain spec {dom!r}")
    if c.order not in (1, 2):
        raise ConfigError(f"order must be 1 or 2, got {c.order!r}")
    if not (isinstance(c.h, (int, float)) and 0 < c.h <= 1):
        raise ConfigError(f"h must lie in (0, 1], got {c.h!r}")
    if not (isinstance(c.grading, (int, float)) and 0 < c.grading <= 1):
        raise ConfigError(f"grading must lie in (0, 1], got {c.grading!r}")
    lo = -0.5 if c.name == "kernel" else 0.0
    hi = 10.0 if c.name == "kernel" else 1.0
    for s in c.s_values:
        if not isinstance(s, (int, float)) or not lo <= s <= hi:
            raise ConfigError(f"s value {s!r} outside [{lo}, {hi}]")
    ks = list(c.k_list)
    if not ks or any(not isinstance(k, int) or isinstance(k, bool) or k < 1 for k in ks):
        raise ConfigError(f"k_list must hold positive integers, got {ks!r}")
    if ks != sorted(set(ks)):
        raise ConfigError("k_list must be strictly ascending")
    if not (isinstance(c.quad_levels, int) and 0 <= c.quad_levels <= 4):
        raise ConfigError("quad_levels must be an integer in [0, 4]")
    if not (isinstance(c.n_random, int) and 1 <= c.n_random <= 200):
        raise ConfigError("n_random must be an integer in [1, 200]")
    if not (isinstance(c.seed, int) and c.seed >= 0):
        raise ConfigError("seed must be a non-negative integer")
    if c.rhs not in ("one", "sinsin"):
        raise ConfigError(f"unknown rhs {c.rhs!r}")


def from_dict(d: dict) -> ExperimentConfig:
    known = {f.name for f in fields(ExperimentConfig)}
    extra = set(d) - known
    if extra:
        raise ConfigError(f"unknown config keys {sorted(extra)}")
    if "name" not in d:
        raise ConfigError("config needs a 'name'")
    base = dict(_DEFAULTS.get(d["name"], {}))
    base.update(d)
    for k in ("s_values", "k_list", "checks"):
        if base.get(k) is not None:
            if not isinstance(base[k], (list, tuple)):
                raise ConfigError(f"{k} must be a list")
            base[k] = tuple(base[k])
    return ExperimentConfig(**base)


def load(path) -> dict:
    try:
        with open(path) as fh:
            d = json.load(fh)
    except (OSError, json.JSONDecodeError) as e:
        raise ConfigError(f"cannot read config {path}: {e}") from e
    if not isinstance(d, dict):
        raise ConfigError("config file must hold a JSON object")
    return d


def with_overrides(cfg: ExperimentConfig, **kw) -> ExperimentConfig:
    kw = {k: v for k, v in kw.items() if v is not None}
    return replace(cfg, **kw) if kw else cfg
