"""Experiment configuration: schema, parsing with line diagnostics, hashing.

A config is a YAML document (JSON also parses) with four blocks::

    version: 1
    model:
      a: 0.08
      sigma2: 0.04
      jumps:                     # optional
        intensity: 0.5
        family: uniform          # uniform | atomic | double_exponential_log
        lo: -0.2
        hi: 0.3
    insurance:
      c: 1.0
      claims: {family: exponential, rate: 2.0}
      interarrival: {family: exponential, rate: 1.0}
    run:
      seed: 20240601
      n_paths: 100000
      n_cycles: 100000
      direct_paths: 0
      delta_A: 1.0e-9
      n_max: 10000
      grid: {base_step: null, resolution: 512, refinement: 0}
      u_grid: null               # "geom:lo:hi:count", a list, or null for the default
      workers: 1
      outputs: [perpetuity]      # any of cycles, perpetuity
    analysis:
      k: null                    # Hill k; null means floor(sqrt(n))
      nonarithmetic_assertion: false

A run manifest (``manifest.json``) is itself accepted as a config: its
embedded ``config`` block is used.
"""

from __future__ import annotations

import copy
import hashlib
import json
import os
from dataclasses import dataclass
from pathlib import Path

import yaml

from . import distributions as D
from .cycles import CycleSpec, PathGridConfig
from .model import LevyModel, derive_log_price_model

SCHEMA_VERSION = 1
SEED_ENV = "RUINSIM_SEED"
WORKERS_ENV = "RUINSIM_WORKERS"

DEFAULTS = {
    "version": SCHEMA_VERSION,
    "model": {"jumps": None},
    "insurance": {},
    "run": {
        "seed": 0,
        "n_paths": 100_000,
        "n_cycles": 100_000,
        "direct_paths": 0,
        "delta_A": 1e-9,
        "n_max": 10_000,
        "grid": {"base_step": None, "resolution": 512, "refinement": 0},
        "u_grid": None,
        "workers": 1,
        "outputs": ["perpetuity"],
    },
    "analysis": {"k": None, "nonarithmetic_assertion": False},
}

CLAIMS = {
    "exponential": (D.ExponentialClaims, ("rate",)),
    "pareto": (D.ParetoClaims, ("scale", "index")),
    "lognormal": (D.LogNormalClaims, ("mu", "sigma")),
    "uniform": (D.UniformClaims, ("lo", "hi")),
}
INTERARRIVALS = {
    "exponential": (D.ExponentialTimes, ("rate",)),
    "gamma": (D.GammaTimes, ("shape", "rate")),
    "deterministic": (D.DeterministicTimes, ("value",)),
    "uniform": (D.UniformTimes, ("lo", "hi")),
}
JUMPS = {
    "uniform": (D.UniformJumps, ("lo", "hi")),
    "atomic": (D.AtomicJumps, ("points", "weights")),
    "double_exponential_log": (D.DoubleExponentialLogJumps, ("eta_plus", "eta_minus", "p_up")),
}
OUTPUTS = {"cycles", "perpetuity"}


class ConfigError(ValueError):
    """Invalid configuration; the message carries file, line and field."""


def _node_to_py(node, path, lines):
    lines[path] = node.start_mark.line + 1
    if isinstance(node, yaml.MappingNode):
        out = {}
        for k, v in node.value:
            key = yaml.safe_load(yaml.serialize(k)) if not isinstance(k, yaml.ScalarNode) else k.value
            out[key] = _node_to_py(v, path + (str(key),), lines)
        return out
    if isinstance(node, yaml.SequenceNode):
        return [_node_to_py(v, path + (str(i),), lines) for i, v in enumerate(node.value)]
    return yaml.safe_load(yaml.serialize(node))


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
    """Resolved configuration plus the source line of every field."""

    data: dict
    source: str = "<memory>"
    lines: dict | None = None

    # -- construction -----------------------------------------------------

    @classmethod
    def from_text(cls, text: str, source: str = "<string>") -> "ExperimentConfig":
        try:
            root = yaml.compose(text)
        except yaml.YAMLError as e:
            mark = getattr(e, "problem_mark", None)
            where = f"{source}:{mark.line + 1}" if mark else source
            raise ConfigError(f"{where}: {getattr(e, 'problem', None) or e}") from None
        lines: dict = {}
        raw = _node_to_py(root, (), lines) if root is not None else {}
        if not isinstance(raw, dict):
            raise ConfigError(f"{source}:1: top level must be a mapping")
        if "config" in raw and "config_hash" in raw:
            raw = raw["config"]
            lines = {p[1:]: n for p, n in lines.items() if p[:1] == ("config",)}
        cfg = cls(_merge(DEFAULTS, raw), source, lines)
        cfg.validate()
        return cfg

    @classmethod
    def load(cls, path) -> "ExperimentConfig":
        path = Path(path)
        try:
            text = path.read_text()
        except OSError as e:
            raise ConfigError(f"{path}: {e.strerror}") from None
        return cls.from_text(text, str(path))

    @classmethod
    def from_dict(cls, data: dict) -> "ExperimentConfig":
        cfg = cls(_merge(DEFAULTS, data))
        cfg.validate()
        return cfg

    def with_overrides(self, seed=None, workers=None, n_paths=None, u_grid=None, env=None) -> "ExperimentConfig":
        """Apply environment then explicit overrides (explicit wins)."""
        env = os.environ if env is None else env
        data = copy.deepcopy(self.data)
        run = data["run"]
        if env.get(SEED_ENV):
            run["seed"] = self._env_int(env, SEED_ENV)
        if env.get(WORKERS_ENV):
            run["workers"] = self._env_int(env, WORKERS_ENV)
        if seed is not None:
            run["seed"] = int(seed)
        if workers is not None:
            run["workers"] = int(workers)
        if n_paths is not None:
            run["n_paths"] = int(n_paths)
            run["n_cycles"] = int(n_paths)
        if u_grid is not None:
            run["u_grid"] = u_grid
        cfg = ExperimentConfig(data, self.source, self.lines)
        cfg.validate()
        return cfg

    @staticmethod
    def _env_int(env, name):
        try:
            return int(env[name], 0)
        except ValueError:
            raise ConfigError(f"environment {name}={env[name]!r} is not an integer") from None

    # -- diagnostics ------------------------------------------------------

    def _where(self, *path) -> str:
        line = None
        if self.lines:
            p = tuple(path)
            while p and p not in self.lines:
                p = p[:-1]
            line = self.lines.get(p)
        loc = f"{self.source}:{line}" if line else self.source
        return f"{loc}: field '{'.'.join(path)}'"

    def _fail(self, msg, *path):
        raise ConfigError(f"{self._where(*path)}: {msg}")

    def _num(self, block, key, *, positive=False, nonneg=False, integer=False, required=True):
        d = self.data[block]
        if key not in d or d[key] is None:
            if required:
                self._fail("missing", block, key)
            return None
        v = d[key]
        if isinstance(v, str):
            # YAML 1.1 reads "1e-9" as a string
            try:
                v = d[key] = float(v)
            except ValueError:
                pass
        if isinstance(v, bool) or not isinstance(v, (int, float)):
            self._fail(f"expected a number, got {v!r}", block, key)
        if integer and int(v) != v:
            self._fail(f"expected an integer, got {v!r}", block, key)
        if positive and not v > 0:
            self._fail(f"must be positive, got {v!r}", block, key)
        if nonneg and v < 0:
            self._fail(f"must be non-negative, got {v!r}", block, key)
        return v

    def _family(self, table, block, *key):
        spec = self.data[block]
        for k in key:
            spec = spec.get(k) if isinstance(spec, dict) else None
        if not isinstance(spec, dict):
            self._fail("expected a mapping with a 'family' key", block, *key)
        fam = spec.get("family")
        if fam not in table:
            self._fail(f"unknown family {fam!r}; choose from {', '.join(sorted(table))}", block, *key, "family")
        cls, params = table[fam]
        missing = [p for p in params if p not in spec]
        if missing:
            self._fail(f"missing parameter(s) {', '.join(missing)} for family {fam!r}", block, *key)
        extra = set(spec) - set(params) - {"family", "intensity"}
        if extra:
            self._fail(f"unknown parameter(s) {', '.join(sorted(extra))}", block, *key)
        args = [tuple(spec[p]) if isinstance(spec[p], list) else spec[p] for p in params]
        try:
            return cls(*args)
        except (ValueError, TypeError) as e:
            self._fail(str(e), block, *key)

    def validate(self) -> None:
        if self.data.get("version") != SCHEMA_VERSION:
            self._fail(f"unsupported schema version {self.data.get('version')!r}", "version")
        for block in ("model", "insurance", "run", "analysis"):
            if not isinstance(self.data.get(block), dict):
                self._fail("missing block", block)
        self._num("model", "a")
        self._num("model", "sigma2", nonneg=True)
        self._num("insurance", "c", positive=True)
        self._num("run", "seed", integer=True, nonneg=True)
        if self.data["run"]["seed"] >= 2**64:
            self._fail("seed must fit in 64 bits", "run", "seed")
        self._num("run", "n_paths", integer=True, positive=True)
        self._num("run", "n_cycles", integer=True, nonneg=True)
        self._num("run", "direct_paths", integer=True, nonneg=True)
        self._num("run", "n_max", integer=True, positive=True)
        d = self._num("run", "delta_A", positive=True)
        if not d < 1:
            self._fail("must lie in (0, 1)", "run", "delta_A")
        self._num("run", "workers", integer=True, nonneg=True)
        outs = self.data["run"]["outputs"]
        if not isinstance(outs, list) or not set(outs) <= OUTPUTS:
            self._fail(f"outputs must be a list drawn from {sorted(OUTPUTS)}", "run", "outputs")
        g = self.data["run"]["grid"]
        if not isinstance(g, dict) or set(g) - {"base_step", "resolution", "refinement"}:
            self._fail("grid takes base_step, resolution, refinement", "run", "grid")
        try:
            self.grid
        except ValueError as e:
            self._fail(str(e), "run", "grid")
        k = self.data["analysis"]["k"]
        if k is not None and (isinstance(k, bool) or not isinstance(k, int) or k < 10):
            self._fail("k must be null or an integer >= 10", "analysis", "k")
        if not isinstance(self.data["analysis"]["nonarithmetic_assertion"], bool):
            self._fail("expected true or false", "analysis", "nonarithmetic_assertion")
        self.claim
        self.interarrival
        self.jumps
        self.model()

    # -- typed views ------------------------------------------------------

    @property
    def run(self) -> dict:
        return self.data["run"]

    @property
    def analysis(self) -> dict:
        return self.data["analysis"]

    @property
    def c(self) -> float:
        return float(self.data["insurance"]["c"])

    @property
    def claim(self) -> D.ClaimLaw:
        return self._family(CLAIMS, "insurance", "claims")

    @property
    def interarrival(self) -> D.InterarrivalLaw:
        return self._family(INTERARRIVALS, "insurance", "interarrival")

    @property
    def jumps(self) -> D.JumpMeasure:
        spec = self.data["model"].get("jumps")
        if spec is None:
            return D.JumpMeasure()
        if not isinstance(spec, dict):
            self._fail("expected a mapping", "model", "jumps")
        lam = spec.get("intensity")
        if isinstance(lam, bool) or not isinstance(lam, (int, float)) or lam < 0:
            self._fail("intensity must be a non-negative number", "model", "jumps", "intensity")
        law = self._family(JUMPS, "model", "jumps")
        return D.JumpMeasure(float(lam), law)

    @property
    def grid(self) -> PathGridConfig:
        g = self.data["run"]["grid"]
        return PathGridConfig(g.get("base_step"), int(g.get("refinement", 0)), int(g.get("resolution", 512)))

    def model(self) -> LevyModel:
        """Derived log-price model; raises ``ConfigError`` with the model
        block's location on an invalid triplet."""
        try:
            return derive_log_price_model(float(self.data["model"]["a"]), float(self.data["model"]["sigma2"]), self.jumps)
        except ValueError as e:
            raise ConfigError(f"{self._where('model')}: {e}") from None

    def cycle_spec(self, model: LevyModel | None = None) -> CycleSpec:
        return CycleSpec.build(model or self.model(), self.interarrival, self.claim, self.c, self.grid)

    # -- hashing ----------------------------------------------------------

    def canonical(self) -> dict:
        """Everything that determines numerical output (workers excluded)."""
        data = copy.deepcopy(self.data)
        data["run"].pop("workers", None)
        return data

    @property
    def config_hash(self) -> str:
        blob = json.dumps(self.canonical(), sort_keys=True, separators=(",", ":"))
        return hashlib.sha256(blob.encode()).hexdigest()
