"""Run configuration: parsing, defaults, validation and hashing.

A config is a TOML file (JSON is accepted too) with the sections
``params``, ``environment``, ``model``, ``run`` and ``output``; see the
README for the schema.  Unknown keys are errors.  The resolved config
(defaults filled in) is hashed without its ``output`` section, so the hash
identifies everything that can change a result.
"""

from __future__ import annotations

import copy
import hashlib
import json
import math
from dataclasses import dataclass
from pathlib import Path

try:
    import tomllib
except ModuleNotFoundError:  # Python < 3.11
    import tomli as tomllib

from .environment import ChiShape, EnvLaw, EnvSpec, Environment, ParamFamily


class ConfigError(ValueError):
    def __init__(self, key: str, message: str):
        super().__init__(f"{key}: {message}")
        self.key = key
        self.message = message


_FAMILY_KEYS = {
    "explicit": {"c": None, "lam": None},
    "polynomial": {"a": 0.0, "b": 0.0, "const_c": 1.0, "const_mu": 0.5, "gamma_c": 0.0, "gamma_mu": 0.0},
    "exponential": {"c": 1.0, "mu": 1.0, "abar": 0.0, "bbar": 0.0, "const_c": 1.0, "const_mu": 1.0},
}

_LAW_KEYS = {
    "dirac": {"value": 1.0},
    "two_point": {"lo": 0.5, "hi": 1.5, "p": 0.5},
    "atoms": {"values": None, "weights": None},
}

DEFAULTS = {
    "environment": {"chi": [[0.5, 1.0]], "seed": 0},
    "model": {"N": 3, "K": 2, "d0": 1.0, "M": 20, "theta": [0.5, 0.5], "immigration": 0.0},
    "run": {"seed": 0, "kmax": 1000, "horizons": [1.0, 10.0, 100.0], "replicas": 1000, "level_cut": 3,
            "n": 2, "horizon": 10.0, "record_every": 1.0, "obs_level": 0, "j": [1000],
            "alpha": [[1.0, 0.0]], "n_particles": 1000, "c": 1.0, "d": 0.25,
            "atoms": [[0.5, 1.0]], "burn": 0.0},
    "output": {"dir": "out", "format": "json"},
}


def _number(key, v, *, integer=False, positive=False, nonneg=False):
    if isinstance(v, bool) or not isinstance(v, (int, float)):
        raise ConfigError(key, f"expected a number, got {v!r}")
    if integer and (not float(v).is_integer()):
        raise ConfigError(key, f"expected an integer, got {v!r}")
    if not math.isfinite(v):
        raise ConfigError(key, "must be finite")
    if positive and v <= 0:
        raise ConfigError(key, f"must be > 0, got {v!r}")
    if nonneg and v < 0:
        raise ConfigError(key, f"must be >= 0, got {v!r}")
    return int(v) if integer else float(v)


def _numlist(key, v, **kw):
    if not isinstance(v, list) or not v:
        raise ConfigError(key, "expected a non-empty list of numbers")
    return [_number(f"{key}[{i}]", x, **kw) for i, x in enumerate(v)]


def _pairs(key, v):
    if not isinstance(v, list) or not v or not all(isinstance(p, list) and len(p) == 2 for p in v):
        raise ConfigError(key, "expected a list of [x, y] pairs")
    return [[_number(f"{key}[{i}][0]", p[0]), _number(f"{key}[{i}][1]", p[1])] for i, p in enumerate(v)]


def _section(raw, name) -> dict:
    sec = raw.get(name, {})
    if not isinstance(sec, dict):
        raise ConfigError(name, "expected a table")
    return dict(sec)


def _fill(name, sec, defaults):
    for k in sec:
        if k not in defaults:
            raise ConfigError(f"{name}.{k}", "unknown key")
    out = {}
    for k, d in defaults.items():
        if k in sec:
            out[k] = sec[k]
        elif d is None:
            raise ConfigError(f"{name}.{k}", "required key missing")
        else:
            out[k] = copy.deepcopy(d)
    return out


@dataclass
class RunConfig:
    resolved: dict
    env: Environment

    @property
    def params(self) -> ParamFamily:
        return self.env.params

    @property
    def model(self) -> dict:
        return self.resolved["model"]

    @property
    def run(self) -> dict:
        return self.resolved["run"]

    @property
    def output(self) -> dict:
        return self.resolved["output"]

    @property
    def hash(self) -> str:
        return config_hash(self.resolved)


def config_hash(resolved: dict) -> str:
    body = {k: v for k, v in resolved.items() if k != "output"}
    return hashlib.sha256(json.dumps(body, sort_keys=True).encode()).hexdigest()[:16]


def resolve(raw: dict) -> RunConfig:
    """Fill defaults, type-check every key and build the environment."""
    if not isinstance(raw, dict):
        raise ConfigError("<root>", "config must be a table")
    for k in raw:
        if k not in ("params", "environment", "model", "run", "output"):
            raise ConfigError(k, "unknown section")
    # params
    p = _section(raw, "params")
    fam = p.pop("family", None)
    if fam not in _FAMILY_KEYS:
        raise ConfigError("params.family", f"expected one of {sorted(_FAMILY_KEYS)}, got {fam!r}")
    params = _fill("params", p, _FAMILY_KEYS[fam])
    if fam == "explicit":
        params["c"] = _numlist("params.c", params["c"], nonneg=True)
        params["lam"] = _numlist("params.lam", params["lam"], nonneg=True)
    else:
        params = {k: _number(f"params.{k}", v) for k, v in params.items()}
    params = {"family": fam, **params}
    # environment
    e = _section(raw, "environment")
    law_kind = e.pop("law", "dirac")
    if law_kind not in _LAW_KEYS:
        raise ConfigError("environment.law", f"expected one of {sorted(_LAW_KEYS)}, got {law_kind!r}")
    env = _fill("environment", e, {**_LAW_KEYS[law_kind], **DEFAULTS["environment"]})
    env["chi"] = _pairs("environment.chi", env["chi"])
    env["seed"] = _number("environment.seed", env["seed"], integer=True, nonneg=True)
    if law_kind == "atoms":
        env["values"] = _numlist("environment.values", env["values"], nonneg=True)
        env["weights"] = _numlist("environment.weights", env["weights"], nonneg=True)
    else:
        for k in _LAW_KEYS[law_kind]:
            env[k] = _number(f"environment.{k}", env[k], nonneg=True)
    env = {"law": law_kind, **env}
    # model, run, output
    model = _fill("model", _section(raw, "model"), DEFAULTS["model"])
    model["N"] = _number("model.N", model["N"], integer=True)
    if model["N"] < 2:
        raise ConfigError("model.N", "must be >= 2")
    model["K"] = _number("model.K", model["K"], integer=True, nonneg=True)
    model["M"] = _number("model.M", model["M"], integer=True)
    if model["M"] < 2:
        raise ConfigError("model.M", "must be >= 2")
    model["d0"] = _number("model.d0", model["d0"], nonneg=True)
    model["immigration"] = _number("model.immigration", model["immigration"], nonneg=True)
    model["theta"] = _numlist("model.theta", model["theta"], nonneg=True)
    if len(model["theta"]) < 2 or not math.isclose(sum(model["theta"]), 1.0, abs_tol=1e-9):
        raise ConfigError("model.theta", "must be a probability vector on at least two types")
    run = _fill("run", _section(raw, "run"), DEFAULTS["run"])
    for k in ("seed", "kmax", "replicas", "level_cut", "n", "obs_level", "n_particles"):
        run[k] = _number(f"run.{k}", run[k], integer=True, nonneg=True)
    for k in ("horizon", "record_every", "c", "d", "burn"):
        run[k] = _number(f"run.{k}", run[k], nonneg=True)
    run["horizons"] = _numlist("run.horizons", run["horizons"], nonneg=True)
    run["j"] = _numlist("run.j", run["j"] if isinstance(run["j"], list) else [run["j"]], integer=True, positive=True)
    run["alpha"] = _pairs("run.alpha", run["alpha"])
    run["atoms"] = _pairs("run.atoms", run["atoms"])
    if run["record_every"] <= 0:
        raise ConfigError("run.record_every", "must be > 0")
    out = _fill("output", _section(raw, "output"), DEFAULTS["output"])
    if out["format"] not in ("json", "csv"):
        raise ConfigError("output.format", "expected 'json' or 'csv'")
    if not isinstance(out["dir"], str):
        raise ConfigError("output.dir", "expected a path string")
    resolved = {"params": params, "environment": env, "model": model, "run": run, "output": out}
    # objects
    try:
        pf = ParamFamily.from_dict(params)
    except (ValueError, TypeError) as exc:
        raise ConfigError("params", str(exc)) from None
    try:
        if law_kind == "dirac":
            law = EnvLaw.dirac(env["value"])
        elif law_kind == "two_point":
            law = EnvLaw.two_point(env["lo"], env["hi"], env["p"])
        else:
            law = EnvLaw.atoms(zip(env["values"], env["weights"]))
    except ValueError as exc:
        raise ConfigError("environment.law", str(exc)) from None
    try:
        shape = ChiShape(tuple(tuple(a) for a in env["chi"]))
    except ValueError as exc:
        raise ConfigError("environment.chi", str(exc)) from None
    return RunConfig(resolved, Environment(EnvSpec(law, shape, pf), env["seed"]))


def load(path) -> RunConfig:
    path = Path(path)
    try:
        text = path.read_text()
    except OSError as exc:
        raise ConfigError("<file>", f"cannot read {path}: {exc.strerror}") from None
    try:
        raw = json.loads(text) if path.suffix == ".json" else tomllib.loads(text)
    except (ValueError, tomllib.TOMLDecodeError) as exc:
        raise ConfigError("<file>", f"parse error: {exc}") from None
    return resolve(raw)
