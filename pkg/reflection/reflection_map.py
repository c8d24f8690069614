# ============================================================================
# FILE: reflection/reflection_map.py
# ============================================================================
"""
The reflection operator

    L(u^1..u^N) = inf{ x >= 0 : (1/N) sum_i h(x + u^i) >= 0 }

and its law-level counterpart psi = inf{ x >= 0 : E[h(x + U)] >= 0 }.

h is only known to be increasing and bi-Lipschitz (m <= slope <= M), so the
root is found by bisection. The returned offset is always the upper end of
the final bracket, hence the mean of h at the offset is never negative.
"""

import logging
from dataclasses import dataclass

import numpy as np

from config.config import REFLECTION_CONFIG
from models.errors import BracketFailure

logger = logging.getLogger(__name__)


@dataclass(frozen=True)
class EmpiricalSample:
    u: np.ndarray

    def __post_init__(self):
        u = np.atleast_1d(np.asarray(self.u, dtype=float))
        if u.ndim != 1 or u.size < 1:
            raise ValueError("an empirical sample needs at least one value")
        if not np.all(np.isfinite(u)):
            raise ValueError("empirical sample values must be finite")
        object.__setattr__(self, "u", u)

    @property
    def N(self):
        return self.u.size


@dataclass(frozen=True)
class ReflectionResult:
    offset: float
    residual: float
    iterations: int
    tol: float


@dataclass(frozen=True)
class GaussianSpec:
    mean: float
    var: float


@dataclass(frozen=True)
class WeightedSample:
    values: np.ndarray
    weights: np.ndarray

    def __post_init__(self):
        v = np.atleast_1d(np.asarray(self.values, dtype=float))
        w = np.atleast_1d(np.asarray(self.weights, dtype=float))
        if v.shape != w.shape:
            raise ValueError("values and weights must have the same shape")
        if np.any(w < 0) or not w.sum() > 0:
            raise ValueError("weights must be nonnegative with positive mass")
        object.__setattr__(self, "values", v)
        object.__setattr__(self, "weights", w / w.sum())


# =============================================================================
# BATCHED BISECTION (rows are independent problems)
# =============================================================================
def _row_means(c, values, x, weights):
    hx = c(x[:, None] + values)
    if weights is None:
        return hx.mean(axis=1)
    return (hx * weights).sum(axis=1)


def _expand_upper(c, values, weights, lo, hi, rows):
    """Grow hi until the mean of h is nonnegative there."""
    for _ in range(REFLECTION_CONFIG["max_bracket_doublings"]):
        f_hi = _row_means(c, values[rows], hi[rows], None if weights is None else weights[rows])
        bad = f_hi < 0
        if not np.any(bad):
            return
        logger.debug("expanding reflection bracket on %d rows", int(bad.sum()))
        idx = rows[bad]
        width = hi[idx] - lo[idx]
        hi[idx] = hi[idx] + np.maximum(width, 1.0)
    raise BracketFailure("mean of h never became nonnegative: h is not increasing")


def _expand_lower(c, values, weights, lo, hi, rows):
    for _ in range(REFLECTION_CONFIG["max_bracket_doublings"]):
        f_lo = _row_means(c, values[rows], lo[rows], None if weights is None else weights[rows])
        bad = f_lo >= 0
        if not np.any(bad):
            return
        idx = rows[bad]
        width = hi[idx] - lo[idx]
        lo[idx] = lo[idx] - np.maximum(width, 1.0)
    raise BracketFailure("mean of h never became negative: h is not increasing")


def bracket_width(values, c, weights=None):
    """Width of the initial bisection bracket [0, hi] of every row of ``values``."""
    values = np.atleast_2d(np.asarray(values, dtype=float))
    if weights is None:
        abs_mean = np.abs(values).mean(axis=1)
    else:
        abs_mean = (np.abs(values) * weights).sum(axis=1)
    return c.root_level + (c.M / c.m) * abs_mean


def effective_tol(tol, width):
    """Bisection tolerance on a bracket of ``width``; ``None`` selects the relative default."""
    if tol is None:
        return REFLECTION_CONFIG["relative_tol"] * (1.0 + np.asarray(width, dtype=float))
    return np.full(np.shape(width), float(tol))


def bisect_offsets(values, c, tol=None, weights=None, nonnegative=True):
    """Solve every row of ``values`` (R, N) at once.

    Returns (offsets, residuals, iterations, tolerances).
    """
    values = np.asarray(values, dtype=float)
    if values.ndim != 2:
        raise ValueError("values must be a 2-D array of rows")
    if tol is not None and not tol > 0:
        raise ValueError(f"tol must be > 0, got {tol}")
    if weights is not None:
        weights = np.asarray(weights, dtype=float)
        weights = weights / weights.sum(axis=1, keepdims=True)

    R = values.shape[0]
    offsets = np.zeros(R)

    if nonnegative:
        f0 = _row_means(c, values, np.zeros(R), weights)
        rows = np.flatnonzero(f0 < 0)
        lo = np.zeros(R)
        hi = bracket_width(values, c, weights)
        if rows.size:
            _expand_upper(c, values, weights, lo, hi, rows)
    else:
        rows = np.arange(R)
        centre = -(values.mean(axis=1) if weights is None else (values * weights).sum(axis=1))
        lo, hi = centre - 1.0, centre + 1.0
        _expand_upper(c, values, weights, lo, hi, rows)
        _expand_lower(c, values, weights, lo, hi, rows)

    tols = effective_tol(tol, hi - lo)

    iterations = 0
    active = rows[(hi[rows] - lo[rows]) > tols[rows]]
    while active.size:
        iterations += 1
        mid = 0.5 * (lo[active] + hi[active])
        f_mid = _row_means(c, values[active], mid, None if weights is None else weights[active])
        up = f_mid >= 0
        hi[active[up]] = mid[up]
        lo[active[~up]] = mid[~up]
        active = active[(hi[active] - lo[active]) > tols[active]]
        if iterations > 4000:
            raise BracketFailure("bisection failed to shrink the bracket")

    offsets[rows] = hi[rows]
    residuals = _row_means(c, values, offsets, weights)
    return offsets, residuals, iterations, tols


def linear_offsets(values, a, b, weights=None):
    """Closed form ((mean u) + b/a)^- for every row; exact, no iterations."""
    values = np.asarray(values, dtype=float)
    mean = values.mean(axis=1) if weights is None else (values * weights).sum(axis=1) / weights.sum(axis=1)
    offsets = np.maximum(-(mean + b / a), 0.0)
    return offsets, a * (mean + offsets) + b


# =============================================================================
# PUBLIC OPERATIONS
# =============================================================================
def empirical_h_mean(s, c, x):
    """(1/N) sum_i h(x + u^i)."""
    return float(np.mean(c(x + s.u)))


def reflection_offset(s, c, tol=None):
    offsets, residuals, iterations, tols = bisect_offsets(s.u[None, :], c, tol)
    return ReflectionResult(float(offsets[0]), float(residuals[0]), iterations, float(tols[0]))


def reflection_offset_linear(s, a, b):
    if not a > 0:
        raise ValueError(f"slope a must be > 0, got {a}")
    offsets, residuals = linear_offsets(s.u[None, :], a, b)
    return ReflectionResult(float(offsets[0]), float(residuals[0]), 0, 0.0)


def reflection_rows(values, c, tol=None):
    """Offsets for a batch of samples; linear constraints use the closed form."""
    if c.is_linear:
        return linear_offsets(values, c.a, c.b)[0]
    return bisect_offsets(values, c, tol)[0]


def gaussian_nodes(mean, var):
    """Gauss-Hermite nodes/weights for E[phi(G)], G ~ N(mean, var)."""
    if var == 0:
        return np.array([float(mean)]), np.array([1.0])
    x, w = np.polynomial.hermite.hermgauss(REFLECTION_CONFIG["gauss_hermite_nodes"])
    return mean + np.sqrt(2.0 * var) * x, w / np.sqrt(np.pi)


def limit_psi(law, c, tol=None, nonnegative=True):
    """inf{x (>= 0) : E[h(x + U)] >= 0} for a Gaussian or weighted law of U.

    ``nonnegative=False`` takes the infimum over the whole real line.
    """
    if isinstance(law, GaussianSpec):
        if law.var < 0:
            raise ValueError(f"variance must be >= 0, got {law.var}")
        values, weights = gaussian_nodes(law.mean, law.var)
    else:
        values, weights = law.values, law.weights
    offsets, _, _, _ = bisect_offsets(values[None, :], c, tol,
                                      weights=weights[None, :], nonnegative=nonnegative)
    return float(offsets[0])


def limit_psi_rows(values, weights, c, tol=None, nonnegative=True):
    """Row-wise limit_psi for a stack of weighted laws (R, n)."""
    if c.is_linear and nonnegative:
        return linear_offsets(values, c.a, c.b, weights)[0]
    return bisect_offsets(values, c, tol, weights=weights, nonnegative=nonnegative)[0]
