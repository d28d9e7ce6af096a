"""Scenario configuration: schema, score-process materialisation, file I/O.

A config is a JSON document.  Score processes are described per version::

    {"kind": "constant", "value": 1.0}               # or "values": [per seller]
    {"kind": "piecewise", "times": [0, 5], "values": [[...], [...]]}
    {"kind": "random", "seed": 3, "distribution": "uniform", "low": 0.2, "high": 1.0}
    {"kind": "random", "seed": 4, "distribution": "bernoulli", "prob": 0.01, "scale": 0.5, "offset": 1.0}
    {"kind": "scaled", "of": "e_C", "factor": 1.2}
    {"kind": "rotating", "value": 1.0, "boost": 0.2, "period": 0.25}

``rotating`` adds ``boost`` to one seller at a time, moving on to the next
seller index every ``period`` time units.

``scaled`` may only refer to a process resolved earlier in the order
``e_C, e_T, ehat_C, ehat_T``.  The reserve uses the same forms with one
value per grid point instead of one per seller.
"""

from __future__ import annotations

import copy
import json
from pathlib import Path

import jsonschema
import numpy as np

from .core import Scenario, TimeGrid
from .errors import AssumptionError, ConfigParseError, ConfigurationError, SchemaError
from .pacing import make_policy, validate_assumptions

SCHEMA_VERSION = 1
SCORE_ORDER = ("e_C", "e_T", "ehat_C", "ehat_T")
TREATMENT_KINDS = ("item_performance", "ranking_boost", "pacing_speed", "lambda_range", "none")

_number = {"type": "number"}
_score_spec = {
    "type": "object",
    "required": ["kind"],
    "properties": {
        "kind": {"enum": ["constant", "piecewise", "random", "scaled", "rotating"]},
        "value": {"type": "number", "minimum": 0},
        "values": {"type": "array"},
        "times": {"type": "array", "items": {"type": "number", "minimum": 0}},
        "seed": {"type": "integer", "minimum": 0},
        "distribution": {"enum": ["uniform", "lognormal", "bernoulli"]},
        "per": {"enum": ["cell", "seller"]},
        "low": {"type": "number", "minimum": 0},
        "high": {"type": "number", "minimum": 0},
        "mean": _number,
        "sigma": {"type": "number", "minimum": 0},
        "prob": {"type": "number", "minimum": 0, "maximum": 1},
        "scale": {"type": "number", "minimum": 0},
        "offset": {"type": "number", "minimum": 0},
        "of": {"enum": list(SCORE_ORDER)},
        "factor": {"type": "number", "minimum": 0},
        "boost": {"type": "number", "minimum": 0},
        "period": {"type": "number", "exclusiveMinimum": 0},
    },
    "additionalProperties": False,
}

CONFIG_SCHEMA = {
    "$schema": "https://json-schema.org/draft/2020-12/schema",
    "title": "pacinglab scenario",
    "type": "object",
    "required": ["n_sellers", "horizon", "dt", "scores", "pacing"],
    "properties": {
        "schema_version": {"const": SCHEMA_VERSION},
        "name": {"type": "string"},
        "description": {"type": "string"},
        "n_sellers": {"type": "integer", "minimum": 1},
        "horizon": {"type": "number", "exclusiveMinimum": 0},
        "dt": {"type": "number", "exclusiveMinimum": 0},
        "p_T": {"type": "number", "minimum": 0, "maximum": 1},
        "p_C": {"type": "number", "minimum": 0, "maximum": 1},
        "seed": {"type": "integer", "minimum": 0, "maximum": 2**64 - 1},
        "replications": {"type": "integer", "minimum": 1},
        "treatment_kind": {"enum": list(TREATMENT_KINDS)},
        "design": {"enum": ["naive", "interleaving"]},
        "initial_state": {"oneOf": [{"type": "number", "minimum": 0}, {"type": "array", "items": {"type": "number", "minimum": 0}}]},
        "scores": {
            "type": "object",
            "required": list(SCORE_ORDER),
            "properties": {k: _score_spec for k in SCORE_ORDER},
            "additionalProperties": False,
        },
        "pacing": {
            "type": "object",
            "required": ["T", "C"],
            "properties": {"T": {"type": "object", "required": ["kind"]}, "C": {"type": "object", "required": ["kind"]}},
            "additionalProperties": False,
        },
        "reserve": _score_spec,
    },
    "additionalProperties": False,
}


def _materialise(spec: dict, rows: int | None, times: np.ndarray, resolved: dict, where: str) -> np.ndarray:
    """Return shape (rows, steps), or (steps,) when ``rows`` is None."""
    steps = times.size
    shape = (steps,) if rows is None else (rows, steps)
    kind = spec["kind"]

    def per_row(values, path):
        arr = np.asarray(values, dtype=float)
        if arr.ndim == 0:
            return np.full(shape, float(arr))
        if rows is None or arr.shape != (rows,):
            raise SchemaError(f"expected a scalar or {rows} per-seller values", path)
        return np.repeat(arr[:, None], steps, axis=1)

    if kind == "constant":
        if "value" in spec:
            return np.full(shape, float(spec["value"]))
        if "values" not in spec:
            raise SchemaError("constant needs 'value' or 'values'", where)
        return per_row(spec["values"], f"{where}/values")
    if kind == "piecewise":
        starts = spec.get("times")
        values = spec.get("values")
        if not starts or values is None or len(starts) != len(values) or starts[0] != 0:
            raise SchemaError("piecewise needs matching 'times' (starting at 0) and 'values'", where)
        if any(b <= a for a, b in zip(starts, starts[1:])):
            raise SchemaError("piecewise times must be strictly increasing", f"{where}/times")
        out = np.empty(shape)
        piece = np.searchsorted(np.asarray(starts, dtype=float), times + 1e-12, side="right") - 1
        for j, value in enumerate(values):
            block = per_row(value, f"{where}/values/{j}")
            cols = piece == j
            out[..., cols] = block[..., cols]
        return out
    if kind == "random":
        if "seed" not in spec:
            raise SchemaError("random score processes need a 'seed'", where)
        rng = np.random.default_rng(spec["seed"])
        per_seller = spec.get("per", "cell") == "seller"
        draw_shape = ((rows,) if rows is not None else (1,)) if per_seller else shape
        dist = spec.get("distribution", "uniform")
        if dist == "uniform":
            low, high = spec.get("low", 0.0), spec.get("high", 1.0)
            if high < low:
                raise SchemaError("high must be >= low", f"{where}/high")
            draws = rng.uniform(low, high, size=draw_shape)
        elif dist == "lognormal":
            draws = rng.lognormal(spec.get("mean", 0.0), spec.get("sigma", 1.0), size=draw_shape)
        else:
            draws = spec.get("scale", 1.0) * (rng.random(draw_shape) < spec.get("prob", 0.5))
        draws = draws + spec.get("offset", 0.0)
        if per_seller:
            return np.full(shape, draws[0]) if rows is None else np.repeat(draws[:, None], steps, axis=1)
        return draws
    if kind == "rotating":
        if rows is None:
            raise SchemaError("rotating processes need one row per seller", where)
        if "period" not in spec:
            raise SchemaError("rotating needs a 'period'", where)
        slot = np.floor(times / spec["period"] + 1e-9).astype(np.int64) % rows
        lit = slot[None, :] == np.arange(rows)[:, None]
        return spec.get("value", 1.0) + spec.get("boost", 0.0) * lit
    if kind == "scaled":
        ref = spec.get("of")
        if ref not in resolved:
            raise SchemaError(f"'{ref}' is not defined before this process", f"{where}/of")
        return spec.get("factor", 1.0) * resolved[ref]
    raise SchemaError(f"unknown score kind {kind!r}", f"{where}/kind")


def validate_config(config: dict) -> None:
    validator = jsonschema.Draft202012Validator(CONFIG_SCHEMA)
    errors = sorted(validator.iter_errors(config), key=lambda e: [str(p) for p in e.absolute_path])
    if errors:
        err = errors[0]
        path = "/".join(str(p) for p in err.absolute_path) or "<root>"
        raise SchemaError(err.message, path)
    p_T, p_C = config.get("p_T", 0.5), config.get("p_C", 0.5)
    if p_T + p_C > 1 + 1e-12:
        raise SchemaError(f"p_T + p_C = {p_T + p_C} exceeds 1", "p_T")
    init = config.get("initial_state", 0.0)
    if isinstance(init, list) and len(init) != config["n_sellers"]:
        raise SchemaError("initial_state must have one entry per seller", "initial_state")


def build_scenario(config: dict, *, dt: float | None = None) -> Scenario:
    """Validate ``config`` and materialise it.  ``dt`` overrides the grid step."""
    config = copy.deepcopy(config)
    if dt is not None:
        config["dt"] = float(dt)
    validate_config(config)
    grid = TimeGrid(float(config["horizon"]), float(config["dt"]))
    times = grid.times
    n = config["n_sellers"]
    resolved: dict[str, np.ndarray] = {}
    for key in SCORE_ORDER:
        resolved[key] = _materialise(config["scores"][key], n, times, resolved, f"scores/{key}")
    reserve_spec = config.get("reserve", {"kind": "constant", "value": 0.0})
    reserve = _materialise(reserve_spec, None, times, {}, "reserve")

    policies = {}
    reports = {}
    for version in ("T", "C"):
        policies[version] = make_policy(config["pacing"][version], validate=False)
        reports[version] = validate_assumptions(policies[version])
        failure = reports[version].first_failure()
        if failure is not None:
            raise AssumptionError(f"pacing policy {version} violates a monotonicity assumption", failure.clause, failure.witness)

    scenario = Scenario(
        name=config.get("name", "scenario"),
        grid=grid,
        e_T=resolved["e_T"],
        e_C=resolved["e_C"],
        ehat_T=resolved["ehat_T"],
        ehat_C=resolved["ehat_C"],
        pacing_T=policies["T"],
        pacing_C=policies["C"],
        reserve=reserve,
        s0=np.asarray(config.get("initial_state", 0.0), dtype=float),
        p_T=float(config.get("p_T", 0.5)),
        p_C=float(config.get("p_C", 0.5)),
        seed=int(config.get("seed", 0)),
        replications=int(config.get("replications", 1000)),
        treatment_kind=config.get("treatment_kind", "item_performance"),
        config=config,
    )
    object.__setattr__(scenario, "validation", reports)
    return scenario


def dumps_config(config: dict) -> str:
    """Serialise with shortest round-trip float repr and LF line endings."""
    return json.dumps(config, indent=2, allow_nan=False) + "\n"


def save_config(config: dict, path) -> Path:
    path = Path(path)
    path.write_text(dumps_config(config), encoding="utf-8", newline="\n")
    return path


def parse_config(text: str) -> dict:
    try:
        config = json.loads(text)
    except json.JSONDecodeError as exc:
        raise ConfigParseError(exc.msg, exc.lineno) from exc
    if not isinstance(config, dict):
        raise ConfigParseError("top level must be an object", 1)
    return config


def load_scenario(path, *, dt: float | None = None) -> Scenario:
    path = Path(path)
    if not path.exists():
        raise ConfigurationError(f"no such config file: {path}")
    return build_scenario(parse_config(path.read_text(encoding="utf-8")), dt=dt)
