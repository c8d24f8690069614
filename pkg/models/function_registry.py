# ============================================================================
# FILE: models/function_registry.py
# ============================================================================
"""
Closed registry of named function families.

Every coefficient of a model (forward drift/diffusion, terminal function,
constraint h, driver F) is a ``NamedFunction``: a family name plus numeric
parameters. Functions are vectorized over numpy arrays and serialize back to
the same ``{"name": ..., **params}`` mapping they were parsed from.
"""

from dataclasses import dataclass, field

import numpy as np

from models.errors import InvalidField, MissingField, UnknownFunctionName


# =============================================================================
# SCALAR FAMILIES  x -> value
# =============================================================================

def _constant(x, c):
    return np.full_like(np.asarray(x, dtype=float), c)


def _affine(x, a, b):
    return a * np.asarray(x, dtype=float) + b


def _polynomial(x, coeffs):
    # ascending order: coeffs[0] + coeffs[1] x + ...
    return np.polynomial.polynomial.polyval(np.asarray(x, dtype=float), coeffs)


def _sin_affine(x, a, b, c):
    x = np.asarray(x, dtype=float)
    return a * x + b + c * np.sin(x)


def _exponential(x, scale, rate, shift):
    return scale * np.exp(rate * np.asarray(x, dtype=float)) + shift


def _kinked_affine(x, a_neg, a_pos, b):
    x = np.asarray(x, dtype=float)
    return b + a_neg * np.minimum(x, 0.0) + a_pos * np.maximum(x, 0.0)


# =============================================================================
# DRIVER FAMILIES  (t, x, y, z) -> value
# =============================================================================

def _driver_zero(t, x, y, z):
    return np.zeros(np.broadcast(x, y, z).shape)


def _driver_constant(t, x, y, z, c):
    return np.full(np.broadcast(x, y, z).shape, float(c))


def _driver_linear(t, x, y, z, c, kt, kx, ky, kz):
    return c + kt * t + kx * np.asarray(x) + ky * np.asarray(y) + kz * np.asarray(z)


def _driver_sin_linear(t, x, y, z, c, ky, kz, amp):
    y = np.asarray(y, dtype=float)
    return c + ky * y + kz * np.asarray(z) + amp * np.sin(y)


@dataclass(frozen=True)
class FunctionFamily:
    name: str
    kind: str  # "scalar" | "driver"
    fn: object
    required: tuple = ()
    defaults: dict = field(default_factory=dict)


FAMILIES = {
    fam.name: fam
    for fam in (
        FunctionFamily("constant", "scalar", _constant, ("c",)),
        FunctionFamily("affine", "scalar", _affine, ("a",), {"b": 0.0}),
        FunctionFamily("polynomial", "scalar", _polynomial, ("coeffs",)),
        FunctionFamily("sin_affine", "scalar", _sin_affine, ("a", "c"), {"b": 0.0}),
        FunctionFamily("exponential", "scalar", _exponential, ("rate",),
                       {"scale": 1.0, "shift": 0.0}),
        FunctionFamily("kinked_affine", "scalar", _kinked_affine,
                       ("a_neg", "a_pos"), {"b": 0.0}),
        FunctionFamily("zero", "driver", _driver_zero),
        FunctionFamily("constant_driver", "driver", _driver_constant, ("c",)),
        FunctionFamily("linear", "driver", _driver_linear, (),
                       {"c": 0.0, "kt": 0.0, "kx": 0.0, "ky": 0.0, "kz": 0.0}),
        FunctionFamily("sin_linear", "driver", _driver_sin_linear, ("amp",),
                       {"c": 0.0, "ky": 0.0, "kz": 0.0}),
    )
}


@dataclass(frozen=True)
class NamedFunction:
    name: str
    params: dict

    @property
    def family(self):
        return FAMILIES[self.name]

    def __call__(self, *args):
        return self.family.fn(*args, **self.params)

    def to_dict(self):
        out = {"name": self.name}
        for key, value in self.params.items():
            out[key] = list(value) if isinstance(value, tuple) else value
        return out

    # helpers used by the oracles to recognize closed-form cases
    def affine_coefficients(self):
        """Return (slope, intercept) if the function is affine, else None."""
        p = self.params
        if self.name == "constant":
            return 0.0, p["c"]
        if self.name == "affine":
            return p["a"], p["b"]
        if self.name == "polynomial":
            coeffs = list(p["coeffs"]) + [0.0, 0.0]
            if all(c == 0.0 for c in coeffs[2:]):
                return coeffs[1], coeffs[0]
        if self.name == "sin_affine" and p["c"] == 0.0:
            return p["a"], p["b"]
        if self.name == "kinked_affine" and p["a_neg"] == p["a_pos"]:
            return p["a_pos"], p["b"]
        return None

    def is_zero_driver(self):
        p = self.params
        if self.name == "zero":
            return True
        if self.name == "constant_driver":
            return p["c"] == 0.0
        if self.name == "linear":
            return all(p[k] == 0.0 for k in ("c", "kt", "kx", "ky", "kz"))
        return False

    def is_smooth(self):
        return self.name != "kinked_affine"


def _as_number(name, key, value):
    if isinstance(value, bool) or not isinstance(value, (int, float)):
        raise InvalidField(f"{name}.{key} must be a number, got {value!r}")
    return float(value)


def make_function(spec, kind):
    """Build a NamedFunction from a ``{"name": ..., **params}`` mapping."""
    if not isinstance(spec, dict):
        raise InvalidField(f"function spec must be an object, got {spec!r}")
    if "name" not in spec:
        raise MissingField("function spec is missing 'name'")

    name = spec["name"]
    family = FAMILIES.get(name)
    if family is None or family.kind != kind:
        raise UnknownFunctionName(
            f"unknown {kind} function {name!r}; known: {', '.join(function_names(kind))}")

    params = dict(family.defaults)
    allowed = set(family.required) | set(family.defaults)
    for key, value in spec.items():
        if key == "name":
            continue
        if key not in allowed:
            raise InvalidField(f"unknown parameter {name}.{key}")
        if key == "coeffs":
            if not isinstance(value, list) or not value:
                raise InvalidField(f"{name}.coeffs must be a non-empty list")
            params[key] = tuple(_as_number(name, key, v) for v in value)
        else:
            params[key] = _as_number(name, key, value)

    for key in family.required:
        if key not in params:
            raise MissingField(f"{name} requires parameter '{key}'")

    return NamedFunction(name, params)


def function_names(kind=None):
    return sorted(n for n, f in FAMILIES.items() if kind is None or f.kind == kind)
