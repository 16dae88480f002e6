"""Run configuration: a YAML document parsed, then validated key by key.

Schema (optional keys in brackets)::

    network:                  # exactly one of
      matrix: [[...], ...]    #   inline column-stochastic matrix
      mean_field: {N: 4, alpha: 0.75}
    schedule:                 # exactly one of
      polya: {a: 1, b: 1}
      power: {c: 1.0, gamma: 0.75}
    [z0]: 0.5 | [z_1, ..., z_N] | uniform     (default 0.5)
    horizon: 10000
    [checkpoints]: [1000, 10000]              (default [horizon])
    [seed]: 0
    [replications]: 1
    [theta]: 0.05
    [experiment]: synchronization | clt_covariance | ci_coverage | test_size | test_power
    [output_path]: out
    [proxy_horizon]: 100000
    [alpha0]: 0.75
    [alpha_true]: 0.9
    [a]: [a_1, ..., a_N]
    [basis]: NTilde | ZTilde
    [clt_mode]: full | hat
    [eq_tol]: 1.0e-9
    [lemma]: {n: 1000000, m0: 2, cases: [{e: 0, x: 0.75, y: 0.75}, {e: log, x: 0.5, y: 0.5}]}

Complex lemma arguments may be written as strings such as ``"0.5+2j"``.
"""
from __future__ import annotations

import copy
import math
from dataclasses import dataclass, field
from pathlib import Path
from typing import Optional

import numpy as np
import yaml

from .dynamics import RateSchedule
from .errors import ConfigParse, ConfigSemantic, IoFailure, UrnsyncError
from .graph import DEFAULT_EQ_TOL, WeightedNetwork, mean_field_network, validate_network
from .montecarlo import KINDS, ExperimentConfig

REQUIRED = ("network", "schedule", "horizon")
OPTIONAL = ("z0", "checkpoints", "seed", "replications", "theta", "experiment", "output_path",
            "proxy_horizon", "alpha0", "alpha_true", "a", "basis", "clt_mode", "eq_tol", "lemma")

DEFAULT_LEMMA_CASES = [
    {"e": 0, "x": 0.75, "y": 0.75},
    {"e": 1, "x": 0.75, "y": 0.75},
    {"e": 2, "x": 0.75, "y": 0.75},
    {"e": "log", "x": 0.5, "y": 0.5},
    {"e": "log", "x": "0.5+1j", "y": 0.5},
    {"e": "log", "x": "0.5+1j", "y": "0.5-1j"},
]


@dataclass
class RunConfig:
    network: dict
    schedule: dict
    horizon: int
    z0: object = 0.5
    checkpoints: list = field(default_factory=list)
    seed: int = 0
    replications: int = 1
    theta: float = 0.05
    experiment: Optional[str] = None
    output_path: str = "out"
    proxy_horizon: Optional[int] = None
    alpha0: Optional[float] = None
    alpha_true: Optional[float] = None
    a: Optional[list] = None
    basis: str = "NTilde"
    clt_mode: Optional[str] = None
    eq_tol: float = DEFAULT_EQ_TOL
    lemma: Optional[dict] = None

    def to_dict(self) -> dict:
        out = {}
        for key in REQUIRED + OPTIONAL:
            value = getattr(self, key)
            if value is not None:
                out[key] = copy.deepcopy(value)
        return out

    def dump(self) -> str:
        return yaml.safe_dump(self.to_dict(), sort_keys=False)

    def build_network(self) -> WeightedNetwork:
        return _build_network(self.network)

    def build_schedule(self) -> RateSchedule:
        return _build_schedule(self.schedule)

    def experiment_config(self, kind: Optional[str] = None) -> ExperimentConfig:
        kind = kind or self.experiment
        if kind is None:
            raise ConfigSemantic("required for this command", "experiment", None)
        try:
            return ExperimentConfig(
                network=self.build_network(), schedule=self.build_schedule(),
                checkpoints=self.checkpoints, replications=self.replications, kind=kind,
                master_seed=self.seed, z0=self.z0, proxy_horizon=self.proxy_horizon,
                theta=self.theta, a=self.a, alpha0=self.alpha0, alpha_true=self.alpha_true,
                basis=self.basis, clt_mode=self.clt_mode, eq_tol=self.eq_tol)
        except ValueError as exc:
            raise ConfigSemantic(str(exc), "experiment", kind) from exc


# ---------------------------------------------------------------- parsing


def parse_text(text: str) -> dict:
    try:
        doc = yaml.safe_load(text)
    except yaml.YAMLError as exc:
        raise ConfigParse(f"invalid YAML: {exc}") from exc
    if not isinstance(doc, dict):
        raise ConfigParse("top level must be a mapping", "<root>", type(doc).__name__)
    return doc


def load_config(path) -> RunConfig:
    try:
        text = Path(path).read_text()
    except OSError as exc:
        raise IoFailure(f"cannot read config {path}: {exc}") from exc
    return validate(parse_text(text))


def loads(text: str) -> RunConfig:
    return validate(parse_text(text))


# ---------------------------------------------------------------- validation


def _number(doc, key, path, kind=float, lo=None, hi=None, lo_open=False, hi_open=False):
    value = doc[key]
    if isinstance(value, bool) or not isinstance(value, (int, float)):
        raise ConfigSemantic("must be a number", path, value)
    if kind is int:
        if isinstance(value, float) and not value.is_integer():
            raise ConfigSemantic("must be an integer", path, value)
        value = int(value)
    else:
        value = float(value)
        if not math.isfinite(value):
            raise ConfigSemantic("must be finite", path, value)
    if lo is not None and (value < lo or (lo_open and value == lo)):
        raise ConfigSemantic(f"must be {'>' if lo_open else '>='} {lo}", path, value)
    if hi is not None and (value > hi or (hi_open and value == hi)):
        raise ConfigSemantic(f"must be {'<' if hi_open else '<='} {hi}", path, value)
    return value


def _one_of(doc, key, options):
    value = doc[key]
    if not isinstance(value, dict) or len(value) != 1 or next(iter(value)) not in options:
        raise ConfigSemantic(f"must be a mapping with exactly one of {options}", key, value)
    name = next(iter(value))
    return name, value[name]


def _fields(body, path, names):
    if not isinstance(body, dict):
        raise ConfigSemantic("must be a mapping", path, body)
    for k in body:
        if k not in names:
            raise ConfigSemantic("unknown key", f"{path}.{k}", body[k])
    for k in names:
        if k not in body:
            raise ConfigSemantic("missing", f"{path}.{k}", None)
    return body


def _build_network(spec) -> WeightedNetwork:
    name, body = next(iter(spec.items()))
    try:
        if name == "matrix":
            return validate_network(np.asarray(body, dtype=float))
        return mean_field_network(int(body["N"]), float(body["alpha"]))
    except (UrnsyncError, ValueError, TypeError) as exc:
        raise ConfigSemantic(str(exc), f"network.{name}", body) from exc


def _build_schedule(spec) -> RateSchedule:
    name, body = next(iter(spec.items()))
    try:
        if name == "polya":
            return RateSchedule.polya(float(body["a"]), float(body["b"]))
        return RateSchedule.power(float(body["c"]), float(body["gamma"]))
    except (UrnsyncError, ValueError, TypeError) as exc:
        raise ConfigSemantic(str(exc), f"schedule.{name}", body) from exc


def _complex(value, path):
    try:
        if isinstance(value, bool):
            raise ValueError
        return complex(str(value).replace(" ", "")) if isinstance(value, str) else complex(value)
    except (TypeError, ValueError):
        raise ConfigSemantic("must be a real or complex number", path, value) from None


def _lemma(body):
    if not isinstance(body, dict):
        raise ConfigSemantic("must be a mapping", "lemma", body)
    for k in body:
        if k not in ("n", "m0", "cases"):
            raise ConfigSemantic("unknown key", f"lemma.{k}", body[k])
    out = {}
    if "n" in body:
        out["n"] = _number(body, "n", "lemma.n", int, lo=3)
    if "m0" in body:
        out["m0"] = _number(body, "m0", "lemma.m0", int, lo=2)
    cases = body.get("cases", DEFAULT_LEMMA_CASES)
    if not isinstance(cases, list) or not cases:
        raise ConfigSemantic("must be a non-empty list", "lemma.cases", cases)
    checked = []
    for i, case in enumerate(cases):
        path = f"lemma.cases[{i}]"
        _fields(case, path, ("e", "x", "y"))
        if case["e"] not in (0, 1, 2, "log"):
            raise ConfigSemantic("must be 0, 1, 2 or log", f"{path}.e", case["e"])
        _complex(case["x"], f"{path}.x")
        _complex(case["y"], f"{path}.y")
        checked.append(dict(case))
    out["cases"] = checked
    return out


def validate(doc: dict) -> RunConfig:
    """Check a parsed document and return a :class:`RunConfig`.

    Every error is a :class:`ConfigSemantic` naming the dotted key path and
    the offending value.
    """
    for key in doc:
        if key not in REQUIRED + OPTIONAL:
            raise ConfigSemantic("unknown key", key, doc[key])
    for key in REQUIRED:
        if key not in doc:
            raise ConfigSemantic("missing required key", key, None)

    name, body = _one_of(doc, "network", ("matrix", "mean_field"))
    if name == "mean_field":
        _fields(body, "network.mean_field", ("N", "alpha"))
        _number(body, "N", "network.mean_field.N", int, lo=1)
        _number(body, "alpha", "network.mean_field.alpha", float, lo=0, hi=1, lo_open=True)
    elif not isinstance(body, list):
        raise ConfigSemantic("must be a list of rows", "network.matrix", body)
    network = {name: copy.deepcopy(body)}
    net = _build_network(network)
    size = net.n_vertices

    name, body = _one_of(doc, "schedule", ("polya", "power"))
    if name == "polya":
        _fields(body, "schedule.polya", ("a", "b"))
        _number(body, "a", "schedule.polya.a", float, lo=0, lo_open=True)
        _number(body, "b", "schedule.polya.b", float, lo=0, lo_open=True)
    else:
        _fields(body, "schedule.power", ("c", "gamma"))
        _number(body, "c", "schedule.power.c", float, lo=0, lo_open=True)
        _number(body, "gamma", "schedule.power.gamma", float, lo=0.5, hi=1, lo_open=True)
    schedule = {name: dict(body)}
    _build_schedule(schedule)

    cfg = RunConfig(network=network, schedule=schedule,
                    horizon=_number(doc, "horizon", "horizon", int, lo=1, hi=2 ** 53))

    if "z0" in doc:
        z0 = doc["z0"]
        if z0 == "uniform" or z0 is None:
            cfg.z0 = z0
        elif isinstance(z0, list):
            if len(z0) != size:
                raise ConfigSemantic(f"must have length {size}", "z0", z0)
            for i in range(size):
                _number(z0, i, f"z0[{i}]", float, lo=0, hi=1)
            cfg.z0 = [float(v) for v in z0]
        else:
            cfg.z0 = _number(doc, "z0", "z0", float, lo=0, hi=1)

    if "checkpoints" in doc:
        cps = doc["checkpoints"]
        if not isinstance(cps, list) or not cps:
            raise ConfigSemantic("must be a non-empty list", "checkpoints", cps)
        cps = [_number(cps, i, f"checkpoints[{i}]", int, lo=1, hi=cfg.horizon) for i in range(len(cps))]
        if sorted(set(cps)) != cps:
            raise ConfigSemantic("must be strictly increasing", "checkpoints", cps)
        cfg.checkpoints = cps
    else:
        cfg.checkpoints = [cfg.horizon]

    if "seed" in doc:
        cfg.seed = _number(doc, "seed", "seed", int, lo=0, hi=2 ** 64 - 1)
    if "replications" in doc:
        cfg.replications = _number(doc, "replications", "replications", int, lo=1)
    if "theta" in doc:
        cfg.theta = _number(doc, "theta", "theta", float, lo=0, hi=1, lo_open=True, hi_open=True)
    if "experiment" in doc:
        if doc["experiment"] not in KINDS:
            raise ConfigSemantic(f"must be one of {KINDS}", "experiment", doc["experiment"])
        cfg.experiment = doc["experiment"]
    if "output_path" in doc:
        if not isinstance(doc["output_path"], str) or not doc["output_path"]:
            raise ConfigSemantic("must be a non-empty string", "output_path", doc["output_path"])
        cfg.output_path = doc["output_path"]
    if "proxy_horizon" in doc:
        cfg.proxy_horizon = _number(doc, "proxy_horizon", "proxy_horizon", int,
                                    lo=max(cfg.checkpoints) + 1, hi=2 ** 53)
    for key in ("alpha0", "alpha_true"):
        if key in doc:
            setattr(cfg, key, _number(doc, key, key, float, lo=0, hi=1, lo_open=True))
    if "a" in doc:
        a = doc["a"]
        if not isinstance(a, list) or len(a) != size:
            raise ConfigSemantic(f"must be a list of length {size}", "a", a)
        a = [_number(a, i, f"a[{i}]") for i in range(size)]
        if abs(sum(a) - 1.0) > 1e-10:
            raise ConfigSemantic("entries must sum to 1", "a", a)
        cfg.a = a
    if "basis" in doc:
        if doc["basis"] not in ("NTilde", "ZTilde"):
            raise ConfigSemantic("must be NTilde or ZTilde", "basis", doc["basis"])
        cfg.basis = doc["basis"]
    if "clt_mode" in doc:
        if doc["clt_mode"] not in ("full", "hat"):
            raise ConfigSemantic("must be full or hat", "clt_mode", doc["clt_mode"])
        cfg.clt_mode = doc["clt_mode"]
    if "eq_tol" in doc:
        cfg.eq_tol = _number(doc, "eq_tol", "eq_tol", float, lo=0, lo_open=True)
    if "lemma" in doc:
        cfg.lemma = _lemma(doc["lemma"])
    return cfg
