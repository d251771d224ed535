"""Experiment configuration: schema, loading, hashing and object builders."""

from __future__ import annotations

import hashlib
import json
from dataclasses import dataclass, field
from pathlib import Path

import jsonschema
import numpy as np

from .calderon import DEFAULT_GRID, CalderonPair, LogGrid, build_partner, normalize_profile
from .errors import ConfigError, HardyscopeError
from .mspace import MetricMeasureSpace, build_circle, set_pair
from .profiles import HOLO_REGISTRY, bump_deriv_profile, divide_power, sqrtl_profile
from .specop import (circle_derivative, cycle_incidence, divergence_form_1d, hodge_dirac_graph,
                     random_hermitian, zero_operator)

PROBE_TYPES = (
    "homomorphism", "engines", "propagation", "resolvent", "band", "calderon", "reproduce",
    "quadratic", "division", "two-param", "composed", "tent-decomposition", "tent-duality",
    "hardy-atoms", "sqrtl-atoms", "bd-bridge", "davies-gaffney", "h4-chain", "doubling",
)

_number = {"type": "number"}
_grid = {
    "type": "object",
    "required": ["tMin", "tMax", "count"],
    "additionalProperties": False,
    "properties": {"tMin": {"type": "number", "exclusiveMinimum": 0},
                   "tMax": {"type": "number", "exclusiveMinimum": 0},
                   "count": {"type": "integer", "minimum": 2}},
}
_model = {
    "type": "object",
    "required": ["kind"],
    "properties": {
        "kind": {"enum": ["circle", "hodge-cycle", "hodge-graph", "divergence", "random-hermitian", "zero"]},
        "n": {"type": "integer", "minimum": 2},
        "dim": {"type": "integer", "minimum": 1},
        "circumference": {"type": "number", "exclusiveMinimum": 0},
        "weights": {"type": "array", "items": _number},
        "edges": {"type": "array", "items": {"type": "array", "items": {"type": "integer"},
                                              "minItems": 2, "maxItems": 2}},
        "edgeLength": {"type": "number", "exclusiveMinimum": 0},
        "coeff": {"oneOf": [_number, {"type": "array", "items": _number},
                            {"type": "object", "required": ["kind"],
                             "properties": {"kind": {"enum": ["sine", "step"]}, "amp": _number,
                                            "freq": {"type": "integer"}, "base": _number}}]},
        "lam": {"type": "number", "exclusiveMinimum": 0},
        "scale": _number,
    },
    "additionalProperties": False,
}
_profile = {
    "type": "object",
    "required": ["kind"],
    "properties": {
        "kind": {"enum": ["bump-deriv", "sqrtl", "holo", "partner", "normalized", "divide"]},
        "N": {"type": "integer", "minimum": 0},
        "delta": {"type": "number", "exclusiveMinimum": 0},
        "name": {"type": "string"},
        "of": {"type": "string"},
        "m": {"type": "integer", "minimum": 0},
        "sigma": {"type": "number", "exclusiveMinimum": 0},
        "tau": {"type": "number", "exclusiveMinimum": 0},
        "theta": {"type": "number", "exclusiveMinimum": 0},
    },
    "additionalProperties": False,
}
SCHEMA = {
    "$schema": "https://json-schema.org/draft/2020-12/schema",
    "type": "object",
    "required": ["name", "model", "probes"],
    "additionalProperties": False,
    "properties": {
        "name": {"type": "string", "minLength": 1},
        "description": {"type": "string"},
        "seed": {"type": "integer", "minimum": 0},
        "model": _model,
        "profiles": {"type": "object", "additionalProperties": _profile},
        "grid": _grid,
        "timeLimit": {"type": "number", "exclusiveMinimum": 0},
        "output": {"type": "object", "additionalProperties": False,
                   "properties": {"dir": {"type": "string"}}},
        "probes": {
            "type": "array",
            "items": {
                "type": "object",
                "required": ["type", "id"],
                "additionalProperties": False,
                "properties": {
                    "type": {"enum": list(PROBE_TYPES)},
                    "id": {"type": "string", "pattern": "^[A-Za-z0-9_.-]+$"},
                    "model": _model,
                    "operator": {"enum": ["D", "L", "BD"]},
                    "params": {"type": "object"},
                },
            },
        },
    },
}


def _pointer(path) -> str:
    return "/" + "/".join(str(p) for p in path) if path else "/"


def validate_config(cfg: dict) -> None:
    """Schema check plus cross-references and static preconditions.

    Raises
    ------
    ConfigError
        With a JSON pointer to the offending field.
    """
    validator = jsonschema.Draft202012Validator(SCHEMA)
    errors = sorted(validator.iter_errors(cfg), key=lambda e: (len(e.absolute_path), list(map(str, e.absolute_path))))
    if errors:
        e = errors[0]
        raise ConfigError(e.message, _pointer(e.absolute_path))
    ids = [p["id"] for p in cfg["probes"]]
    for i, pid in enumerate(ids):
        if ids.index(pid) != i:
            raise ConfigError(f"duplicate probe id {pid!r}", f"/probes/{i}/id")
    profiles = cfg.get("profiles", {})
    seen = []
    for name, spec in profiles.items():
        if "of" in spec and spec["of"] not in seen:
            raise ConfigError(f"profile {spec['of']!r} is not defined before {name!r}", f"/profiles/{name}/of")
        if spec["kind"] in ("partner", "normalized", "divide") and "of" not in spec:
            raise ConfigError(f"profile kind {spec['kind']!r} needs 'of'", f"/profiles/{name}")
        if spec["kind"] == "holo" and spec.get("name") not in HOLO_REGISTRY:
            raise ConfigError(f"unknown holomorphic profile {spec.get('name')!r}", f"/profiles/{name}/name")
        seen.append(name)
    if "grid" in cfg and cfg["grid"]["tMax"] <= cfg["grid"]["tMin"]:
        raise ConfigError("tMax must exceed tMin", "/grid/tMax")
    from .experiments import static_check
    for i, probe in enumerate(cfg["probes"]):
        params = probe.get("params", {})
        for key, val in params.items():
            if isinstance(val, str) and key.endswith(("Profile", "profile")) and val not in profiles:
                raise ConfigError(f"profile {val!r} is not defined", f"/probes/{i}/params/{key}")
        static_check(probe, f"/probes/{i}")


def load_config(path) -> dict:
    try:
        text = Path(path).read_text(encoding="utf-8")
    except OSError as exc:
        raise ConfigError(f"cannot read config: {exc}", "") from exc
    try:
        cfg = json.loads(text)
    except json.JSONDecodeError as exc:
        raise ConfigError(f"invalid JSON: {exc}", "") from exc
    validate_config(cfg)
    return cfg


def canonical_json(obj) -> str:
    return json.dumps(obj, sort_keys=True, separators=(",", ":"), ensure_ascii=False)


def config_hash(cfg: dict) -> str:
    return hashlib.sha256(canonical_json(cfg).encode("utf-8")).hexdigest()


# ---------------------------------------------------------------------------
# builders


@dataclass
class Model:
    kind: str
    ops: dict
    divergence: object = None
    space: MetricMeasureSpace | None = None

    def operator(self, role: str | None, pointer: str = ""):
        role = role or "D"
        if role not in self.ops:
            raise ConfigError(f"model {self.kind!r} has no operator {role!r}", pointer)
        return self.ops[role]


def _coeff(spec, n: int):
    if spec is None:
        return 1.0
    if isinstance(spec, (int, float)):
        return float(spec)
    if isinstance(spec, list):
        return np.asarray(spec, float)
    base = float(spec.get("base", 1.0))
    amp = float(spec.get("amp", 0.5))
    k = int(spec.get("freq", 1))
    if spec["kind"] == "sine":
        return lambda x: base + amp * np.sin(2 * np.pi * k * x)
    return lambda x: np.where((x * k) % 1.0 < 0.5, base + amp, base)


def build_model(spec: dict, rng: np.random.Generator, pointer: str = "/model") -> Model:
    kind = spec["kind"]

    def need(key):
        if key not in spec:
            raise ConfigError(f"model kind {kind!r} needs {key!r}", pointer)
        return spec[key]

    try:
        if kind == "circle":
            op = circle_derivative(need("n"), spec.get("circumference", 2 * np.pi))
            return Model(kind, {"D": op}, space=op.space)
        if kind == "hodge-cycle":
            n = need("n")
            op = hodge_dirac_graph(cycle_incidence(n), spec.get("weights"), spec.get("edgeLength", 1.0))
            return Model(kind, {"D": op}, space=op.space)
        if kind == "hodge-graph":
            edges = need("edges")
            nv = spec.get("n", 1 + max(max(e) for e in edges))
            d = np.zeros((len(edges), nv))
            for i, (a, b) in enumerate(edges):
                d[i, a], d[i, b] = -1.0, 1.0
            op = hodge_dirac_graph(d, spec.get("weights"), spec.get("edgeLength", 1.0))
            return Model(kind, {"D": op}, space=op.space)
        if kind == "divergence":
            n = need("n")
            m = divergence_form_1d(n, _coeff(spec.get("coeff"), n), spec.get("lam", 0.1))
            return Model(kind, {"D": m.BD, "BD": m.BD, "L": m.L}, m, m.L.space)
        if kind == "random-hermitian":
            dim = need("dim")
            sp = build_circle(dim)
            op = random_hermitian(dim, rng, sp, spec.get("scale", 1.0))
            return Model(kind, {"D": op}, space=sp)
        if kind == "zero":
            sp = build_circle(need("n"))
            return Model(kind, {"D": zero_operator(sp)}, space=sp)
    except ConfigError:
        raise
    except HardyscopeError as exc:
        raise ConfigError(str(exc), pointer) from exc
    raise ConfigError(f"unknown model kind {kind!r}", pointer + "/kind")


def build_profiles(specs: dict) -> dict:
    """Build profiles in declaration order.

    Partner entries store a ``CalderonPair``; every other entry stores a profile.
    """
    out = {}
    for name, spec in specs.items():
        ptr = f"/profiles/{name}"
        kind = spec["kind"]
        try:
            if kind == "bump-deriv":
                out[name] = bump_deriv_profile(spec.get("N", 2), spec.get("delta", 1.0))
            elif kind == "sqrtl":
                out[name] = sqrtl_profile(spec.get("N", 1), spec.get("delta", 1.0))[0]
            elif kind == "holo":
                th = spec.get("theta")
                fac = HOLO_REGISTRY[spec["name"]]
                out[name] = fac(th) if th is not None else fac()
            elif kind == "partner":
                base = _as_profile(out[spec["of"]])
                out[name] = build_partner(base, spec.get("sigma", 5.0), spec.get("tau", 3.0),
                                          spec.get("theta", np.pi / 4))
            elif kind == "normalized":
                out[name] = normalize_profile(_as_profile(out[spec["of"]], holo=True))
            elif kind == "divide":
                out[name] = divide_power(_as_profile(out[spec["of"]]), spec.get("m", 1))
        except HardyscopeError as exc:
            raise ConfigError(str(exc), ptr) from exc
    return out


def _as_profile(obj, holo: bool = False):
    if isinstance(obj, CalderonPair):
        return obj.psi if holo else obj.eta
    return obj


def build_grid(spec: dict | None) -> LogGrid:
    if spec is None:
        return DEFAULT_GRID
    if spec["tMax"] <= spec["tMin"]:
        raise ConfigError("tMax must exceed tMin", "/grid/tMax")
    return LogGrid(float(spec["tMin"]), float(spec["tMax"]), int(spec["count"]))


def build_pairs(space: MetricMeasureSpace, spec: dict, pointer: str) -> list:
    """Set pairs from ``{"kind": "arcs", "length", "gaps", "whole"}`` or explicit index lists.

    Arcs index consecutive points ``[0, length)`` and ``[length + gap, 2 length + gap)``
    modulo ``n``; ``whole`` adds ``E = F = M``.
    """
    n = space.n
    kind = spec.get("kind", "arcs")
    pairs = []
    if kind == "arcs":
        L = int(spec.get("length", max(1, n // 12)))
        for g in spec.get("gaps", []):
            g = int(g)
            if 2 * L + g > n:
                raise ConfigError(f"arc gap {g} does not fit on {n} points", pointer + "/gaps")
            pairs.append(set_pair(space, np.arange(L), np.arange(L + g, 2 * L + g)))
    elif kind == "explicit":
        for E, F in spec.get("sets", []):
            if min(E + F) < 0 or max(E + F) >= n:
                raise ConfigError("set index out of range", pointer + "/sets")
            pairs.append(set_pair(space, np.asarray(E, int), np.asarray(F, int)))
    else:
        raise ConfigError(f"unknown pair kind {kind!r}", pointer + "/kind")
    if spec.get("whole", False):
        pairs.append(set_pair(space, np.arange(n), np.arange(n)))
    return pairs


@dataclass
class Context:
    """Everything a probe runner may need."""

    cfg: dict
    seed: int
    model: Model
    profiles: dict
    grid: LogGrid
    cache: dict = field(default_factory=dict)

    def rng(self, salt: int | str = 0) -> np.random.Generator:
        s = salt if isinstance(salt, int) else int(hashlib.sha256(salt.encode()).hexdigest()[:8], 16)
        return np.random.default_rng([self.seed, s])
