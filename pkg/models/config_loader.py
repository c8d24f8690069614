# ============================================================================
# FILE: models/config_loader.py
# ============================================================================
"""
JSON model/config documents  <->  (ModelSpec, SolverConfig).

Document layout::

    {
      "id": "demo",
      "model": {"x0": 0, "T": 1, "drift": {...}, "diffusion": {...},
                "terminal": {...}, "driver": {...}, "constraint": {...}},
      "solver": {"N": 1000, "seed": 7, "grid": {"steps": 20}, ...}
    }

Unknown keys are rejected at every level.
"""

import json

from config.config import RUNTIME_CONFIG, SOLVER_CONFIG
from models.errors import InvalidField, MissingField, ParseError
from models.function_registry import make_function
from models.model_spec import (
    ConstraintSpec,
    DriverSpec,
    ModelSpec,
    SolverConfig,
    TimeGrid,
)

TOP_KEYS = {"id", "model", "solver"}
MODEL_KEYS = {"x0", "T", "drift", "diffusion", "terminal", "driver", "constraint"}
SOLVER_KEYS = {"N", "seed", "grid", "scheme", "basis_degree", "bisect_tol",
               "condexp", "inner_picard", "inner_tol", "inner_max"}


def _require(obj, key, where):
    if key not in obj:
        raise MissingField(f"{where} is missing '{key}'")
    return obj[key]


def _reject_unknown(obj, allowed, where):
    if not isinstance(obj, dict):
        raise InvalidField(f"{where} must be an object")
    unknown = sorted(set(obj) - set(allowed))
    if unknown:
        raise InvalidField(f"unknown keys in {where}: {', '.join(unknown)}")


def _number(value, where):
    if isinstance(value, bool) or not isinstance(value, (int, float)):
        raise InvalidField(f"{where} must be a number, got {value!r}")
    return float(value)


def _integer(value, where):
    if isinstance(value, bool) or not isinstance(value, int):
        raise InvalidField(f"{where} must be an integer, got {value!r}")
    return value


# ----------------------------------------------------------------------------
# model section
# ----------------------------------------------------------------------------
def _parse_constraint(obj):
    if not isinstance(obj, dict):
        raise InvalidField("model.constraint must be an object")
    if _require(obj, "name", "model.constraint") == "affine":
        _reject_unknown(obj, {"name", "a", "b"}, "model.constraint")
        a = _number(_require(obj, "a", "model.constraint"), "constraint.a")
        return ConstraintSpec.linear(a, _number(obj.get("b", 0.0), "constraint.b"))

    fn_spec = {k: v for k, v in obj.items() if k not in ("m", "M")}
    h = make_function(fn_spec, "scalar")
    m = _number(_require(obj, "m", "model.constraint"), "constraint.m")
    M = _number(_require(obj, "M", "model.constraint"), "constraint.M")
    return ConstraintSpec.general(h, m, M)


def _parse_driver(obj):
    if not isinstance(obj, dict):
        raise InvalidField("model.driver must be an object")
    mode = _require(obj, "mode", "model.driver")
    if mode != "constant" and "lambda" not in obj:
        raise MissingField(f"driver mode {mode!r} requires 'lambda'")
    lam = _number(obj.get("lambda", 0.0), "driver.lambda")
    F = make_function({k: v for k, v in obj.items() if k not in ("mode", "lambda")}, "driver")
    return DriverSpec(mode, F, lam)


def parse_model(obj, model_id="model"):
    _reject_unknown(obj, MODEL_KEYS, "model")
    T = _number(_require(obj, "T", "model"), "model.T")
    if not T > 0:
        raise InvalidField(f"model.T must be positive, got {T}")
    return ModelSpec(
        x0_init=_number(_require(obj, "x0", "model"), "model.x0"),
        b_fwd=make_function(_require(obj, "drift", "model"), "scalar"),
        sigma_fwd=make_function(_require(obj, "diffusion", "model"), "scalar"),
        g=make_function(_require(obj, "terminal", "model"), "scalar"),
        driver=_parse_driver(_require(obj, "driver", "model")),
        constraint=_parse_constraint(_require(obj, "constraint", "model")),
        T=T,
        model_id=model_id,
    )


# ----------------------------------------------------------------------------
# solver section
# ----------------------------------------------------------------------------
def _parse_grid(obj, T):
    _reject_unknown(obj, {"steps", "nodes"}, "solver.grid")
    if "nodes" in obj:
        if "steps" in obj:
            raise InvalidField("solver.grid takes either 'steps' or 'nodes'")
        nodes = obj["nodes"]
        if not isinstance(nodes, list):
            raise InvalidField("solver.grid.nodes must be a list")
        return TimeGrid(tuple(_number(t, "grid.nodes[]") for t in nodes))
    steps = _integer(_require(obj, "steps", "solver.grid"), "grid.steps")
    return TimeGrid.uniform(T, steps)


def _parse_scheme(value):
    if value == "perstep":
        return {"scheme": "perstep"}
    if value == "picard":
        raise MissingField("scheme 'picard' needs an object with max_iter and tol_fix")
    if not isinstance(value, dict):
        raise InvalidField(f"unknown scheme {value!r}")
    _reject_unknown(value, {"name", "max_iter", "tol_fix"}, "solver.scheme")
    if _require(value, "name", "solver.scheme") != "picard":
        raise InvalidField(f"unknown scheme {value['name']!r}")
    max_iter = _integer(_require(value, "max_iter", "solver.scheme"), "scheme.max_iter")
    if max_iter < 1:
        raise InvalidField(f"scheme.max_iter must be >= 1, got {max_iter}")
    return {
        "scheme": "picard",
        "max_iter": max_iter,
        "tol_fix": _number(value.get("tol_fix", SOLVER_CONFIG["tol_fix"]), "scheme.tol_fix"),
    }


def parse_solver(obj, T):
    _reject_unknown(obj, SOLVER_KEYS, "solver")
    kwargs = {
        "N": _integer(_require(obj, "N", "solver"), "solver.N"),
        "grid": _parse_grid(_require(obj, "grid", "solver"), T),
        "seed": _integer(obj.get("seed", 0), "solver.seed"),
    }
    kwargs.update(_parse_scheme(obj.get("scheme", "perstep")))
    for key in ("basis_degree", "inner_picard", "inner_max"):
        if key in obj:
            kwargs[key] = _integer(obj[key], f"solver.{key}")
    for key in ("bisect_tol", "inner_tol"):
        if key in obj:
            kwargs[key] = _number(obj[key], f"solver.{key}")
    if "condexp" in obj:
        kwargs["condexp"] = obj["condexp"]
    return SolverConfig(**kwargs)


# ----------------------------------------------------------------------------
# public API
# ----------------------------------------------------------------------------
def load_config(text):
    """Parse a model/config document into (ModelSpec, SolverConfig)."""
    try:
        doc = json.loads(text)
    except (TypeError, ValueError) as e:
        raise ParseError(f"not a JSON document: {e}") from e
    _reject_unknown(doc, TOP_KEYS, "document")
    model_id = doc.get("id", "model")
    if not isinstance(model_id, str):
        raise InvalidField("id must be a string")
    spec = parse_model(_require(doc, "model", "document"), model_id)
    cfg = parse_solver(_require(doc, "solver", "document"), spec.T)
    return spec, cfg


def load_config_file(path):
    try:
        with open(path, "r", encoding="utf-8") as fh:
            text = fh.read()
    except OSError as e:
        raise ParseError(f"cannot read {path}: {e}") from e
    return load_config(text)


def config_to_dict(spec, cfg):
    return {"id": spec.model_id, "model": spec.to_dict(), "solver": cfg.to_dict()}


def dump_config(spec, cfg):
    """Canonical serialized form; load_config(dump_config(...)) round-trips."""
    return json.dumps(config_to_dict(spec, cfg), indent=2, sort_keys=True) + "\n"


# ----------------------------------------------------------------------------
# environment overrides
# ----------------------------------------------------------------------------
def runtime_seed(default):
    raw = RUNTIME_CONFIG["seed"]
    if raw in (None, ""):
        return default
    try:
        seed = int(raw, 10)
    except ValueError as e:
        raise InvalidField(f"MRBSDE_SEED must be a decimal integer, got {raw!r}") from e
    if not 0 <= seed < 2 ** 64:
        raise InvalidField(f"MRBSDE_SEED must fit in 64 bits, got {raw}")
    return seed


def runtime_threads(default=1):
    raw = RUNTIME_CONFIG["threads"]
    if raw in (None, ""):
        return default
    try:
        threads = int(raw, 10)
    except ValueError as e:
        raise InvalidField(f"MRBSDE_THREADS must be an integer, got {raw!r}") from e
    if threads < 1:
        raise InvalidField(f"MRBSDE_THREADS must be >= 1, got {threads}")
    return threads
