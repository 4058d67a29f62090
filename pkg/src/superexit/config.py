"""Flat ``key = value`` configuration files.

Values are Python literals (numbers, tuples, lists, strings, booleans).
Initial measures use atom syntax ``mu = [(0, 0):1, (0.3, 0):0.5]``.
Blank lines and ``#`` comments are ignored.
"""
from __future__ import annotations

import ast
import hashlib
import re
from dataclasses import dataclass, field, fields

from .branching_sim import SimConfig, ValidationError

SIM_KEYS = {f.name for f in fields(SimConfig)}
EXPERIMENTS = ("simulate", "exitmeasure", "density", "pde-solve", "verify-laplace",
               "verify-exit-approx", "check-kernels", "trace")
EXTRA_KEYS = {
    "experiment": str,
    "workers": int,
    "bandwidth": float,
    "bandwidths": tuple,
    "grid_n": int,
    "lam": float,
    "lams": tuple,
    "arc": tuple,
    "x0": tuple,
    "delta_hit": float,
    "alpha": float,
    "eps": float,
    "cap_radius": float,
    "cap_center": tuple,
}


class ConfigError(ValueError):
    def __init__(self, msg, line: int | None = None):
        super().__init__(f"line {line}: {msg}" if line is not None else msg)
        self.line = line


_ATOM = re.compile(r"\(([^()]*)\)\s*:\s*([^,\]\s]+)")


def parse_mu(text: str, line: int | None = None) -> tuple:
    body = text.strip()
    if not (body.startswith("[") and body.endswith("]")):
        raise ConfigError("mu must look like [(x, y):mass, ...]", line)
    atoms = _ATOM.findall(body)
    rest = _ATOM.sub("", body[1:-1]).replace(",", "").strip()
    if rest or not atoms:
        raise ConfigError(f"cannot parse mu atoms in {text!r}", line)
    out = []
    for pt, m in atoms:
        try:
            p = ast.literal_eval(f"({pt},)")
            out.append((tuple(float(c) for c in p), float(ast.literal_eval(m))))
        except (ValueError, SyntaxError) as e:
            raise ConfigError(f"bad mu atom ({pt}):{m}", line) from e
    return tuple(out)


@dataclass
class Experiment:
    sim: SimConfig
    params: dict = field(default_factory=dict)
    text: str = ""

    @property
    def config_hash(self) -> str:
        return config_hash(self.text)

    def get(self, key, default=None):
        return self.params.get(key, default)


def config_hash(text: str) -> str:
    """sha256 of the config text with line endings and trailing space normalized."""
    norm = "\n".join(line.rstrip() for line in text.replace("\r\n", "\n").split("\n")).strip()
    return hashlib.sha256(norm.encode("utf-8")).hexdigest()


def parse_config_text(text: str) -> Experiment:
    sim_kw, params = {}, {}
    for i, raw in enumerate(text.splitlines(), start=1):
        line = raw.split("#", 1)[0].strip()
        if not line:
            continue
        if "=" not in line:
            raise ConfigError(f"expected 'key = value', got {raw.strip()!r}", i)
        key, val = (s.strip() for s in line.split("=", 1))
        if key in sim_kw or key in params:
            raise ConfigError(f"duplicate key {key!r}", i)
        if key == "mu":
            sim_kw["mu"] = parse_mu(val, i)
            continue
        if key not in SIM_KEYS and key not in EXTRA_KEYS:
            raise ConfigError(f"unknown key {key!r}", i)
        try:
            v = ast.literal_eval(val)
        except (ValueError, SyntaxError):
            v = val  # bare strings such as experiment = density
        if isinstance(v, list):
            v = tuple(v)
        (sim_kw if key in SIM_KEYS else params)[key] = v
    try:
        sim = SimConfig(**sim_kw)
    except TypeError as e:
        raise ConfigError(str(e)) from e
    exp = Experiment(sim, params, text)
    validate_experiment(exp)
    return exp


def validate_experiment(exp: Experiment):
    name = exp.params.get("experiment")
    if name is not None and name not in EXPERIMENTS:
        raise ValidationError(f"experiment must be one of {EXPERIMENTS}, got {name!r}")
    sim = exp.sim
    if name in ("density", "trace") and not sim.d < 1 + 2 / sim.beta:
        raise ValidationError(
            f"{name} needs the subcritical dimension d < 1 + 2/beta; got d={sim.d}, beta={sim.beta}")


def parse_config(path) -> Experiment:
    with open(path, encoding="utf-8") as fh:
        return parse_config_text(fh.read())
