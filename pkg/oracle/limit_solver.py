# ============================================================================
# FILE: oracle/limit_solver.py
# ============================================================================
"""
Reference solutions of the limit (N -> infinity) mean-reflected equation.

For a frozen driver the limit solution is explicit:

    U_t         = E[xi + int_t^T f ds | X_t]
    psi_t       = inf{x >= 0 : E[h(x + U_t)] >= 0}
    K_T - K_t   = sup_{s >= t} psi_s
    Y_t         = U_t + K_T - K_t

``limit_solver`` evaluates U by backward quadrature on a lattice for X and
iterates the frozen driver to a fixed point; ``closed_form_linear`` covers
the Gaussian, zero-driver, linear-constraint case in closed form.
"""

import logging
from dataclasses import dataclass, field

import numpy as np
import pandas as pd

from config.config import ORACLE_CONFIG
from models.errors import AssumptionViolated, PicardDivergence, UnsupportedModel
from reflection.reflection_map import limit_psi_rows
from stochastics.brownian import euler_forward_raw, generate_brownian

logger = logging.getLogger(__name__)


@dataclass(frozen=True)
class LimitSolution:
    grid: object              # grid the law is stored on
    factor: int               # coarse node k sits at index k * factor
    K: np.ndarray             # (len(grid.nodes),) K_limit, K[0] = 0
    psi: np.ndarray           # psi*_t per node
    y_mean: np.ndarray
    y_var: np.ndarray
    value_fn: object          # (index, x) -> E[Y_t | X_t = x]
    z_fn: object              # (index, x) -> Z_t at X_t = x
    terminal_jump: float = 0.0
    provenance: dict = field(default_factory=dict)

    def index(self, k):
        return k * self.factor

    def y_at(self, k, x):
        return self.value_fn(self.index(k), np.asarray(x, dtype=float))

    def z_at(self, k, x):
        return self.z_fn(self.index(k), np.asarray(x, dtype=float))

    def K_coarse(self):
        return self.K[:: self.factor]

    def extended_K(self):
        """(K[0..M], K[M] + terminal jump) on the coarse nodes."""
        K = self.K_coarse()
        return np.append(K, K[-1] + self.terminal_jump)

    @property
    def K_T(self):
        return float(self.K[-1] + self.terminal_jump)

    def to_frame(self):
        return pd.DataFrame({
            "t": self.grid.times,
            "K": self.K,
            "psi_star": self.psi,
            "Y_mean": self.y_mean,
            "Y_var": self.y_var,
        })

    def to_dict(self):
        out = dict(self.provenance)
        out.update({"K_T": self.K_T, "nodes": len(self.grid.nodes), "factor": self.factor})
        return out


# =============================================================================
# CLOSED FORM (zero driver, linear h, Gaussian terminal value)
# =============================================================================
def _gaussian_coefficients(model):
    """(alpha, beta, b, sigma) if xi = alpha X_T + beta with constant drift/vol."""
    g = model.g.affine_coefficients()
    b = model.b_fwd.affine_coefficients()
    s = model.sigma_fwd.affine_coefficients()
    if g is None or b is None or s is None or b[0] != 0.0 or s[0] != 0.0:
        return None
    return g[0], g[1], b[1], s[1]


def closed_form_applicable(model):
    return (model.driver.is_zero() and model.constraint.is_linear
            and _gaussian_coefficients(model) is not None)


def closed_form_linear(model, grid):
    if not closed_form_applicable(model):
        raise UnsupportedModel(
            "closed form needs a zero driver, a linear constraint, affine g and constant b, sigma")
    alpha, beta, b, sigma = _gaussian_coefficients(model)
    c = model.constraint
    T = grid.T
    t = grid.times

    mean_xi = alpha * (model.x0_init + b * T) + beta
    if c.a * mean_xi + c.b < -1e-12 * (1.0 + abs(c.b)):
        raise AssumptionViolated(f"E[h(xi)] = {c.a * mean_xi + c.b:.6g} < 0")
    n = len(t)

    def value_fn(j, x):
        return alpha * (x + b * (T - t[j])) + beta

    def z_fn(j, x):
        return np.full(np.shape(x), alpha * sigma)

    return LimitSolution(
        grid=grid,
        factor=1,
        K=np.zeros(n),
        psi=np.zeros(n),
        y_mean=np.full(n, mean_xi),
        y_var=alpha ** 2 * sigma ** 2 * t,
        value_fn=value_fn,
        z_fn=z_fn,
        provenance={"oracle": "closed_form_linear", "model_id": model.model_id},
    )


# =============================================================================
# LATTICE
# =============================================================================
def _lattice(model, fine, seed):
    """Uniform lattice over +-sigmas pilot deviations, x0 on a node."""
    inc = generate_brownian(fine, ORACLE_CONFIG["pilot_paths"], seed,
                            stream=ORACLE_CONFIG["pilot_stream"])
    X = euler_forward_raw(model, inc.dB, fine)
    spread = max(float(X.std(axis=0).max()), 1e-3)
    width = ORACLE_CONFIG["lattice_sigmas"] * spread
    lo = float(X.mean(axis=0).min()) - width
    hi = float(X.mean(axis=0).max()) + width
    P = ORACLE_CONFIG["lattice_points"]
    h = (hi - lo) / (P - 1)
    j0 = int(round((model.x0_init - lo) / h))
    lattice = model.x0_init + h * (np.arange(P) - j0)
    return lattice, j0, h


def transition_matrix(model, lattice, dt):
    """Row i: law of one Euler step from lattice[i], projected on the lattice."""
    h = lattice[1] - lattice[0]
    mu = lattice + model.b_fwd(lattice) * dt
    s = np.abs(model.sigma_fwd(lattice)) * np.sqrt(dt)
    P = np.zeros((lattice.size, lattice.size))

    smooth = s >= h
    if np.any(smooth):
        diff = lattice[None, :] - mu[smooth, None]
        kernel = np.exp(-0.5 * (diff / s[smooth, None]) ** 2)
        P[smooth] = kernel / kernel.sum(axis=1, keepdims=True)

    rows = np.flatnonzero(~smooth)
    if rows.size:
        # linear mass splitting between the two neighbours of the mean
        pos = np.clip((mu[rows] - lattice[0]) / h, 0.0, lattice.size - 1.0)
        left = np.minimum(np.floor(pos).astype(int), lattice.size - 2)
        frac = pos - left
        P[rows, left] = 1.0 - frac
        P[rows, left + 1] += frac
    return P


# =============================================================================
# QUADRATURE FIXED POINT
# =============================================================================
def limit_solver(checked, cfg=None, factor=None, picard_tol=None):
    cfg = checked.cfg if cfg is None else cfg
    driver = checked.driver
    if driver.uses_z:
        raise UnsupportedModel("no limit solver for z-dependent drivers")
    factor = ORACLE_CONFIG["refine_factor"] if factor is None else factor
    picard_tol = ORACLE_CONFIG["picard_tol"] if picard_tol is None else picard_tol

    fine = cfg.grid.refine(factor)
    lattice, j0, h = _lattice(checked, fine, cfg.seed)
    Mf = fine.M
    dts = fine.dt

    cache = {}
    trans = []
    for dt in dts:
        key = round(float(dt), 15)
        if key not in cache:
            cache[key] = transition_matrix(checked, lattice, dt)
        trans.append(cache[key])
    logger.info("limit lattice: %d points, h=%.3g, %d fine steps, %d kernels",
                lattice.size, h, Mf, len(cache))

    W = np.zeros((Mf + 1, lattice.size))
    W[0, j0] = 1.0
    for k in range(Mf):
        W[k + 1] = trans[k].T @ W[k]

    c = checked.constraint
    g = checked.terminal(lattice)
    zeros = np.zeros_like(lattice)
    Y_prev = np.zeros((Mf + 1, lattice.size))
    max_sweeps = 1 if driver.mode == "constant" else ORACLE_CONFIG["max_sweeps"]

    for sweep in range(1, max_sweeps + 1):
        U = np.empty((Mf + 1, lattice.size))
        F = np.zeros((Mf + 1, lattice.size))
        U[Mf] = g
        for k in range(Mf - 1, -1, -1):
            F[k] = driver(fine.nodes[k], lattice, Y_prev[k], zeros)
            U[k] = trans[k] @ U[k + 1] + dts[k] * F[k]
        psi = limit_psi_rows(U, W, c, None)
        R = np.maximum.accumulate(psi[::-1])[::-1]
        Y = U + R[:, None]
        move = float(np.max(np.abs(Y - Y_prev)))
        Y_prev = Y
        logger.debug("limit sweep %d: movement %.3g, K_T %.6g", sweep, move, R[0] - R[-1])
        if driver.mode == "constant" or move < picard_tol:
            break
    else:
        raise PicardDivergence(f"limit solver did not converge in {max_sweeps} sweeps")

    K = R[0] - R
    y_mean = (W * Y).sum(axis=1)
    y_var = np.maximum((W * (Y - y_mean[:, None]) ** 2).sum(axis=1), 0.0)
    Zt = checked.sigma_fwd(lattice)[None, :] * np.gradient(U, lattice, axis=1)

    tol = 1e-8
    cmean = (W * c(Y)).sum(axis=1)
    if cmean.min() < -tol:
        raise AssumptionViolated(f"limit law violates the constraint: min E[h(Y)] = {cmean.min():.3g}")
    bound = (c.M / c.m) * (2.0 * float(W[Mf] @ np.abs(g))
                           + float(np.sum(dts[:, None] * W[:Mf] * np.abs(F[:Mf]))))
    K_T = float(R[0])
    if K_T > bound + tol:
        raise AssumptionViolated(f"K_T = {K_T:.6g} exceeds its a priori bound {bound:.6g}")

    def value_fn(j, x):
        return np.interp(x, lattice, Y[j])

    def z_fn(j, x):
        return np.interp(x, lattice, Zt[j])

    return LimitSolution(
        grid=fine,
        factor=factor,
        K=K,
        psi=psi,
        y_mean=y_mean,
        y_var=y_var,
        value_fn=value_fn,
        z_fn=z_fn,
        terminal_jump=float(R[-1]),
        provenance={
            "oracle": "limit_solver",
            "model_id": checked.model_id,
            "lattice_points": int(lattice.size),
            "lattice_step": h,
            "picard_sweeps": sweep,
            "K_bound": bound,
        },
    )
