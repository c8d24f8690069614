"""
=============================================================================
CONDITIONAL EXPECTATION ENGINES
=============================================================================
- least squares Monte Carlo across the particle cross-section (QR solve)
- Z estimate by regressing y_next * dB / dt
- exact averaging over the children of a Rademacher tree node

Both engines speak the same node layout: values at step k are (n_k, N)
arrays, n_k = 1 for regression and 2^(N k) for the tree.
=============================================================================
"""

import logging
from dataclasses import dataclass

import numpy as np
from scipy.linalg import solve_triangular

from config.config import REGRESSION_CONFIG
from models.errors import RankDeficient, ShapeMismatch

logger = logging.getLogger(__name__)


@dataclass(frozen=True)
class Basis:
    degree: int

    def __post_init__(self):
        if self.degree < 0:
            raise ValueError(f"basis degree must be >= 0, got {self.degree}")

    @staticmethod
    def standardize(x):
        """Cross-sectional (center, scale); a flat feature gets scale = inf."""
        center = float(np.mean(x))
        std = float(np.std(x))
        scale = std if std > REGRESSION_CONFIG["std_floor"] else np.inf
        return center, scale

    def design(self, x, center, scale):
        z = (np.asarray(x, dtype=float) - center) / scale
        return np.vander(z, self.degree + 1, increasing=True)


@dataclass(frozen=True)
class FitResult:
    coefficients: np.ndarray
    condition: float
    predictions: np.ndarray
    degree: int
    center: float
    scale: float

    def predict(self, x):
        return Basis(self.degree).design(x, self.center, self.scale) @ self.coefficients


# =============================================================================
# LEAST SQUARES
# =============================================================================
def fit_condexp(x, v, basis):
    """Least-squares projection of v on (1, z, ..., z^d), z the standardized x."""
    x = np.asarray(x, dtype=float)
    v = np.asarray(v, dtype=float)
    if x.ndim != 1 or v.shape != x.shape:
        raise ShapeMismatch(f"features {x.shape} and targets {v.shape} must be equal 1-D arrays")
    if x.size <= basis.degree:
        raise RankDeficient(f"{x.size} samples cannot fit a degree-{basis.degree} basis")

    center, scale = basis.standardize(x)
    A = basis.design(x, center, scale)
    Q, R = np.linalg.qr(A)
    diag = np.abs(np.diag(R))
    if diag.min() <= REGRESSION_CONFIG["rank_tol"] * diag.max():
        raise RankDeficient(f"design of degree {basis.degree} is rank deficient")

    beta = solve_triangular(R, Q.T @ v)
    return FitResult(
        coefficients=beta,
        condition=float(np.linalg.cond(R)),
        predictions=A @ beta,
        degree=basis.degree,
        center=center,
        scale=scale,
    )


def fit_condexp_reducing(x, v, degree):
    """fit_condexp, lowering the degree until the design has full rank."""
    for d in range(degree, -1, -1):
        try:
            return fit_condexp(x, v, Basis(d))
        except RankDeficient as e:
            if d == 0:
                raise
            flat = np.isinf(Basis.standardize(x)[1])
            (logger.debug if flat else logger.warning)("%s; retrying with degree %d", e, d - 1)


def estimate_z(y_next, dB, dt, x, basis):
    """Regression of y_next * dB / dt on the basis, evaluated at x."""
    if not dt > 0:
        raise ValueError(f"dt must be > 0, got {dt}")
    target = np.asarray(y_next, dtype=float) * np.asarray(dB, dtype=float) / dt
    return fit_condexp_reducing(x, target, basis.degree).predictions


# =============================================================================
# EXACT TREE AVERAGING
# =============================================================================
def exact_condexp_tree(tree, values):
    """Average every block of 2^N children into its parent node."""
    values = np.asarray(values, dtype=float)
    b = tree.branching
    n = values.shape[0] if values.ndim else 0
    parents = n // b if b else 0
    depth, size = 0, 1
    while size < parents:
        size *= b
        depth += 1
    if n == 0 or n % b or size != parents:
        raise ShapeMismatch(f"{n} node values do not form a full tree level")
    children = values.reshape((parents, b) + values.shape[1:])
    return np.tensordot(tree.child_probs, children, axes=([0], [1]))


# =============================================================================
# ENGINES
# =============================================================================
class RegressionEngine:
    """Per-particle regression on the forward state; one node per step."""

    branching = 1

    def __init__(self, X, dB, grid, degree):
        self._X = np.asarray(X, dtype=float)
        self._dB = np.asarray(dB, dtype=float)
        self.grid = grid
        self.degree = degree
        self.N = self._X.shape[0]

    def n_nodes(self, k):
        return 1

    def node_probs(self, k):
        return np.ones(1)

    def X(self, k):
        return self._X[None, :, k]

    def expand(self, values, k):
        return values

    def condexp(self, k, values_next):
        fit = fit_condexp_reducing(self._X[:, k], values_next[0], self.degree)
        return fit.predictions[None, :]

    def z(self, k, values_next):
        z = estimate_z(values_next[0], self._dB[:, k], self.grid.dt[k],
                       self._X[:, k], Basis(self.degree))
        return z[None, :]


class TreeEngine:
    """Exact conditional expectations on the full Rademacher tree."""

    def __init__(self, tree, X_levels):
        self.tree = tree
        self._X = X_levels
        self.grid = tree.grid
        self.N = tree.N
        self.branching = tree.branching

    def n_nodes(self, k):
        return self.tree.n_nodes(k)

    def node_probs(self, k):
        return self.tree.node_probs(k)

    def X(self, k):
        return self._X[k]

    def expand(self, values, k):
        """Repeat node values of depth k onto the children at depth k+1."""
        return np.repeat(values, self.branching, axis=0)

    def condexp(self, k, values_next):
        return exact_condexp_tree(self.tree, values_next)

    def z(self, k, values_next):
        dB = self.tree.child_increments(k)
        return exact_condexp_tree(self.tree, values_next * dB) / self.grid.dt[k]
