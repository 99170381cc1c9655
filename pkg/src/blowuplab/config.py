"""Experiment configuration: one YAML file fully determines a run."""

from __future__ import annotations

import copy
from dataclasses import dataclass, field
from pathlib import Path

import yaml

from .nonlin import FamilyError, make_builtin

CHECKS = ("certify", "simulate", "frames", "energy", "defect", "profiles", "diagnostics")

DEFAULTS = {
    "family": {"name": "pure_exp", "params": {}},
    "domain": {"n": 1, "R": 1.0, "bc": "dirichlet"},
    "initial": {"kind": "bump", "a": 4.0, "m": 1.0, "r0": 0.0},
    "solver": {
        "J": 800,
        "grading": 12.0,
        "safety": 0.05,
        "dt_max": 1e-3,
        "u_cap": None,
        "diffusion": True,
        "reaction": True,
    },
    "checks": ["certify"],
    "output_dir": "out",
    "seed": 0,
    "tol": 1e-12,
    "A0": 3.0,
}


class ConfigError(ValueError):
    def __init__(self, message: str, field: str | None = None, line: int | None = None):
        where = []
        if field:
            where.append(f"field '{field}'")
        if line is not None:
            where.append(f"line {line}")
        super().__init__(f"{message}" + (f" ({', '.join(where)})" if where else ""))
        self.field = field
        self.line = line


def _line_index(text: str) -> dict:
    """Map dotted key paths to 1-based line numbers."""
    try:
        root = yaml.compose(text)
    except yaml.YAMLError:
        return {}
    out = {}

    def walk(node, prefix):
        if isinstance(node, yaml.MappingNode):
            for k, v in node.value:
                key = f"{prefix}.{k.value}" if prefix else str(k.value)
                out[key] = k.start_mark.line + 1
                walk(v, key)

    if root is not None:
        walk(root, "")
    return out


def _merge(base: dict, over: dict) -> dict:
    out = copy.deepcopy(base)
    for k, v in over.items():
        if isinstance(v, dict) and isinstance(out.get(k), dict):
            out[k] = _merge(out[k], v)
        else:
            out[k] = v
    return out


@dataclass
class ExperimentConfig:
    family: dict
    domain: dict
    initial: dict
    solver: dict
    checks: list
    output_dir: str
    seed: int
    tol: float
    A0: float
    raw: dict = field(default_factory=dict, repr=False)

    def as_dict(self) -> dict:
        return {
            "family": self.family,
            "domain": self.domain,
            "initial": self.initial,
            "solver": self.solver,
            "checks": list(self.checks),
            "output_dir": self.output_dir,
            "seed": self.seed,
            "tol": self.tol,
            "A0": self.A0,
        }

    def make_family(self):
        return make_builtin(self.family["name"], self.family.get("params") or {})


def from_mapping(data: dict, lines: dict | None = None) -> ExperimentConfig:
    lines = lines or {}

    def fail(msg, key):
        raise ConfigError(msg, key, lines.get(key))

    if not isinstance(data, dict):
        raise ConfigError("top level must be a mapping")
    unknown = set(data) - set(DEFAULTS)
    if unknown:
        key = sorted(unknown)[0]
        fail(f"unknown section '{key}'", key)
    cfg = _merge(DEFAULTS, data)
    for section in ("family", "domain", "initial", "solver"):
        if not isinstance(cfg[section], dict):
            fail("must be a mapping", section)
        extra = set(cfg[section]) - set(DEFAULTS[section])
        if extra:
            key = f"{section}.{sorted(extra)[0]}"
            fail("unknown key", key)

    try:
        make_builtin(cfg["family"]["name"], cfg["family"].get("params") or {})
    except FamilyError as exc:
        fail(str(exc), "family.name" if "unknown family" in str(exc) else "family.params")

    def number(key, lo=None, hi=None, integer=False, allow_none=False):
        sec, name = key.split(".") if "." in key else (None, key)
        val = cfg[sec][name] if sec else cfg[name]
        if val is None and allow_none:
            return
        if isinstance(val, bool) or not isinstance(val, (int, float)):
            fail(f"expected a number, got {val!r}", key)
        if integer and int(val) != val:
            fail(f"expected an integer, got {val!r}", key)
        if lo is not None and val < lo or hi is not None and val > hi:
            fail(f"value {val!r} outside [{lo}, {hi}]", key)

    number("domain.n", 1, 9, integer=True)
    number("domain.R", 1e-6, 1e6)
    if cfg["domain"]["bc"] not in ("dirichlet", "truncated_free"):
        fail("bc must be 'dirichlet' or 'truncated_free'", "domain.bc")
    if cfg["initial"]["kind"] not in ("bump", "plateau", "constant"):
        fail("kind must be bump, plateau or constant", "initial.kind")
    number("initial.a", 0.0, 700.0)
    number("initial.m", 0.0, 100.0)
    number("initial.r0", 0.0)
    number("solver.J", 8, 100000, integer=True)
    number("solver.grading", 0.0, 50.0)
    number("solver.safety", 1e-6, 1.0)
    number("solver.dt_max", 1e-16, 1.0)
    number("solver.u_cap", 0.0, 700.0, allow_none=True)
    for key in ("diffusion", "reaction"):
        if not isinstance(cfg["solver"][key], bool):
            fail("expected true or false", f"solver.{key}")
    if not isinstance(cfg["checks"], list) or any(c not in CHECKS for c in cfg["checks"]):
        fail(f"checks must be a list drawn from {', '.join(CHECKS)}", "checks")
    number("seed", 0, integer=True)
    number("tol", 1e-16, 1e-3)
    number("A0", 0.0, 1e6)
    return ExperimentConfig(
        family=cfg["family"], domain=cfg["domain"], initial=cfg["initial"], solver=cfg["solver"],
        checks=list(cfg["checks"]), output_dir=str(cfg["output_dir"]), seed=int(cfg["seed"]),
        tol=float(cfg["tol"]), A0=float(cfg["A0"]), raw=data,
    )


def load(path) -> ExperimentConfig:
    text = Path(path).read_text()
    try:
        data = yaml.safe_load(text)
    except yaml.YAMLError as exc:
        mark = getattr(exc, "problem_mark", None)
        raise ConfigError(f"YAML parse error: {getattr(exc, 'problem', exc)}", line=mark.line + 1 if mark else None) from None
    return from_mapping(data or {}, _line_index(text))
