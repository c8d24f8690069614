# ============================================================================
# FILE: solver/particle_solver.py
# ============================================================================
"""
Backward schemes for the N-particle mean-reflected system.

Per step k (perstep scheme):

    c     = E_k[y_{k+1}]
    y_hat = c + dt_k F(t_k, X_k, y~, z)      y~ from J inner corrections
    dK_k  = L(y_hat^1 .. y_hat^N)            one global reduction
    y_k   = y_hat + dK_k

The picard scheme freezes the (y, z) arguments of F at the previous sweep
and repeats whole sweeps until the node values stop moving.
"""

import logging
from dataclasses import dataclass, field, replace

import numpy as np
import pandas as pd

from models.errors import NonFiniteState, PicardDivergence, ShapeMismatch
from reflection.reflection_map import bracket_width, effective_tol, reflection_rows
from regression.condexp import RegressionEngine, TreeEngine
from stochastics.binary_tree import build_binary_tree, tree_forward
from stochastics.brownian import euler_forward, generate_brownian

logger = logging.getLogger(__name__)


@dataclass(frozen=True)
class SolutionBundle:
    Y: list           # M+1 arrays (n_k, N)
    Z: list           # M arrays (n_k, N), diagonal part only
    K: list           # M+1 arrays (n_k,)
    dK: list          # M arrays (n_k,)
    dK_T: np.ndarray  # (n_M,) terminal jump psi_T
    X: list           # M+1 arrays (n_k, N)
    grid: object
    probs: list       # M+1 arrays (n_k,)
    constraint: object
    constraint_min: float = 0.0
    skorokhod_max: float = 0.0
    meta: dict = field(default_factory=dict)

    @property
    def N(self):
        return self.Y[0].shape[1]

    @property
    def M(self):
        return len(self.Y) - 1

    @property
    def K_T(self):
        """Total reflection including the terminal jump (probability-weighted)."""
        return float(self.probs[-1] @ (self.K[-1] + self.dK_T))

    def particle_path(self, i=0):
        """(Y, Z) node paths of particle i; single-node layouts only."""
        self._require_single_node()
        Y = np.array([y[0, i] for y in self.Y])
        Z = np.array([z[0, i] for z in self.Z])
        return Y, Z

    def extended_K(self):
        """(K[0], ..., K[M], K[M] + dK_T)."""
        self._require_single_node()
        K = [float(k[0]) for k in self.K]
        return np.array(K + [K[-1] + float(self.dK_T[0])])

    def _require_single_node(self):
        if any(y.shape[0] != 1 for y in self.Y):
            raise ShapeMismatch("path views need one node per step (regression layout)")


@dataclass(frozen=True)
class WindowSolution:
    k_start: int
    k_end: int
    Y: list
    Z: list
    dK: list


# =============================================================================
# SINGLE STEPS
# =============================================================================
def terminal_adjust(xi, c, tol=None):
    """theta = xi + psi_T with psi_T = L(xi); rows of a 2-D input are separate samples."""
    xi = np.asarray(xi, dtype=float)
    rows = xi[None, :] if xi.ndim == 1 else xi
    psi = reflection_rows(rows, c, tol)
    theta = rows + psi[:, None]
    if xi.ndim == 1:
        return theta[0], float(psi[0])
    return theta, psi


def _check_finite(values, what, k):
    if not np.all(np.isfinite(values)):
        raise NonFiniteState(f"{what} became non-finite at step {k}")


def driver_part(driver, t, x, c, z, dt, k, inner_picard, inner_tol, inner_max):
    """c + dt F(t, x, y~, z) with y~ the fixed point of y -> c + dt F(t, x, y, z).

    At least ``inner_picard`` corrections run from y = c. Further ones follow,
    up to ``inner_max``, while the last move exceeds inner_tol (1 + max|y|).
    """
    if not driver.uses_y:
        return c + dt * driver(t, x, c, z)
    y = c
    move = 0.0
    for j in range(1, inner_max + 1):
        nxt = c + dt * driver(t, x, y, z)
        move = float(np.max(np.abs(nxt - y)))
        y = nxt
        if j >= inner_picard and move <= inner_tol * (1.0 + float(np.max(np.abs(y)))):
            return y
    raise PicardDivergence(
        f"inner corrections still move by {move:.3g} at step {k} "
        f"after {inner_max} corrections (tol {inner_tol})")


def backward_step(y_next, model, engine, k, cfg, frozen=None):
    """One step k+1 -> k. Returns (y_k, z_k, dK_k).

    ``frozen`` = (y, z) evaluates the driver at fixed arguments instead of
    the implicit inner corrections (picard sweeps).
    """
    driver = model.driver
    t, dt = model_time(engine.grid, k)
    x = engine.X(k)
    c = engine.condexp(k, y_next)
    z = engine.z(k, y_next)

    if frozen is not None:
        y_arg, z_arg = frozen
        y_hat = c + dt * driver(t, x, y_arg, z_arg)
    else:
        y_hat = driver_part(driver, t, x, c, z, dt, k,
                            cfg.inner_picard, cfg.inner_tol, cfg.inner_max)
    _check_finite(y_hat, "y_hat", k)

    dK = reflection_rows(y_hat, model.constraint, cfg.bisect_tol)
    return y_hat + dK[:, None], z, dK


def model_time(grid, k):
    return float(grid.nodes[k]), float(grid.dt[k])


# =============================================================================
# FULL SWEEPS
# =============================================================================
def _sweep(model, engine, cfg, y_end, k_start, k_end, frozen=None):
    Y = {k_end: y_end}
    Z, dK = {}, {}
    for k in range(k_end - 1, k_start - 1, -1):
        fz = None if frozen is None else (frozen[0][k], frozen[1][k])
        Y[k], Z[k], dK[k] = backward_step(Y[k + 1], model, engine, k, cfg, fz)
    return Y, Z, dK


def _perstep(model, engine, cfg, theta):
    return _sweep(model, engine, cfg, theta, 0, engine.grid.M) + (1,)


def _picard_outer(model, engine, cfg, theta):
    M = engine.grid.M
    y_prev = {k: np.zeros((engine.n_nodes(k), engine.N)) for k in range(M + 1)}
    z_prev = {k: np.zeros((engine.n_nodes(k), engine.N)) for k in range(M)}
    for sweep in range(1, cfg.max_iter + 1):
        Y, Z, dK = _sweep(model, engine, cfg, theta, 0, M, frozen=(y_prev, z_prev))
        move = max(float(np.max(np.abs(Y[k] - y_prev[k]))) for k in range(M + 1))
        y_prev, z_prev = Y, Z
        logger.debug("picard sweep %d: sup movement %.3g", sweep, move)
        if move < cfg.tol_fix:
            logger.info("picard scheme converged after %d sweeps", sweep)
            return Y, Z, dK, sweep
    raise PicardDivergence(
        f"picard scheme did not reach tol_fix={cfg.tol_fix} in {cfg.max_iter} sweeps")


def _accumulate_K(engine, dK, M):
    K = [np.zeros(1)]
    for k in range(M):
        K.append(engine.expand(K[k] + dK[k], k))
    return K


def build_engine(model, cfg):
    """Forward simulation plus the conditional-expectation engine of ``cfg``."""
    if cfg.condexp == "tree":
        tree = build_binary_tree(cfg.grid, cfg.N)
        return TreeEngine(tree, tree_forward(model, tree))
    inc = generate_brownian(cfg.grid, cfg.N, cfg.seed, stream=0, threads=cfg.threads)
    return engine_from_increments(model, cfg, inc)


def engine_from_increments(model, cfg, inc):
    fwd = euler_forward(model, inc)
    return RegressionEngine(fwd.X, inc.dB, cfg.grid, cfg.basis_degree)


def solve_with_engine(model, cfg, engine):
    M = cfg.grid.M
    xi = model.terminal(engine.X(M))
    theta, psi_T = terminal_adjust(xi, model.constraint, cfg.bisect_tol)
    _check_finite(theta, "terminal value", M)

    if cfg.scheme == "picard":
        Y, Z, dK, sweeps = _picard_outer(model, engine, cfg, theta)
    else:
        Y, Z, dK, sweeps = _perstep(model, engine, cfg, theta)

    dK_list = [dK[k] for k in range(M)]
    bundle = SolutionBundle(
        Y=[Y[k] for k in range(M + 1)],
        Z=[Z[k] for k in range(M)],
        K=_accumulate_K(engine, dK_list, M),
        dK=dK_list,
        dK_T=np.asarray(psi_T, dtype=float),
        X=[engine.X(k) for k in range(M + 1)],
        grid=cfg.grid,
        probs=[engine.node_probs(k) for k in range(M + 1)],
        constraint=model.constraint,
        meta={
            "model_id": getattr(model, "model_id", "model"),
            "scheme": cfg.scheme,
            "condexp": cfg.condexp,
            "sweeps": sweeps,
            "N": cfg.N,
            "M": M,
            "seed": cfg.seed,
        },
    )
    cmin, smax = skorokhod_residual(bundle)
    logger.info("solve %s: N=%d M=%d K_T=%.6g constraint_min=%.3g skorokhod_max=%.3g",
                bundle.meta["model_id"], cfg.N, M, bundle.K_T, cmin, smax)
    return replace(bundle, constraint_min=cmin, skorokhod_max=smax)


def solve(checked, cfg=None):
    """Solve a validated model; ``cfg`` defaults to the one it was checked with."""
    cfg = checked.cfg if cfg is None else cfg
    return solve_with_engine(checked, cfg, build_engine(checked, cfg))


def solve_with_increments(checked, cfg, inc):
    """Regression solve on a given increment table (e.g. permuted particle streams)."""
    return solve_with_engine(checked, cfg, engine_from_increments(checked, cfg, inc))


def solve_on_window(checked, cfg, k_start, k_end, y_end, engine=None):
    """Re-solve on nodes [k_start, k_end] from given values at k_end, no terminal jump."""
    cfg = checked.cfg if cfg is None else cfg
    if not 0 <= k_start < k_end <= cfg.grid.M:
        raise ValueError(f"need 0 <= k_start < k_end <= {cfg.grid.M}, got {k_start}, {k_end}")
    engine = build_engine(checked, cfg) if engine is None else engine
    y_end = np.asarray(y_end, dtype=float)
    if y_end.shape != (engine.n_nodes(k_end), engine.N):
        raise ShapeMismatch(f"window end values must have shape "
                            f"{(engine.n_nodes(k_end), engine.N)}, got {y_end.shape}")
    Y, Z, dK = _sweep(checked, engine, cfg, y_end, k_start, k_end)
    return WindowSolution(
        k_start, k_end,
        Y=[Y[k] for k in range(k_start, k_end + 1)],
        Z=[Z[k] for k in range(k_start, k_end)],
        dK=[dK[k] for k in range(k_start, k_end)],
    )


# =============================================================================
# DIAGNOSTICS + TABLES
# =============================================================================
def constraint_means(bundle):
    """Per step, per node: (1/N) sum_i h(Y[i][k])."""
    return [np.mean(bundle.constraint(y), axis=1) for y in bundle.Y]


def skorokhod_residual(bundle):
    means = constraint_means(bundle)
    constraint_min = min(float(m.min()) for m in means)
    pushes = [bundle.dK[k] * means[k] for k in range(bundle.M)]
    pushes.append(np.asarray(bundle.dK_T) * means[-1])
    skorokhod_max = max(float(p.max()) for p in pushes)
    return constraint_min, skorokhod_max


def reflection_tolerance(bundle, tol):
    """Largest bisection tolerance a reflection of ``bundle`` could have run with."""
    if tol is not None:
        return float(tol)
    c = bundle.constraint
    # the pre-push samples satisfy mean|y_hat| <= mean|Y| + dK
    pushes = [float(np.max(d)) for d in bundle.dK] + [float(np.max(bundle.dK_T))]
    width = max(float(np.max(bracket_width(y, c))) for y in bundle.Y) + (c.M / c.m) * max(pushes)
    return float(effective_tol(None, width))


def _weighted(p, values):
    return float(p @ values)


def solution_frame(bundle):
    """``k,t,K,dK,constraint_mean,Y_mean,Y_std``; node values averaged with their probabilities."""
    means = constraint_means(bundle)
    rows = []
    for k in range(bundle.M + 1):
        p = bundle.probs[k]
        y = bundle.Y[k]
        y_mean = _weighted(p, y.mean(axis=1))
        y_var = _weighted(p, ((y - y_mean) ** 2).mean(axis=1))
        dk = bundle.dK[k] if k < bundle.M else bundle.dK_T
        rows.append({
            "k": k,
            "t": bundle.grid.nodes[k],
            "K": _weighted(p, bundle.K[k]),
            "dK": _weighted(p, dk),
            "constraint_mean": _weighted(p, means[k]),
            "Y_mean": y_mean,
            "Y_std": float(np.sqrt(max(y_var, 0.0))),
        })
    return pd.DataFrame(rows, columns=["k", "t", "K", "dK", "constraint_mean", "Y_mean", "Y_std"])


def particles_frame(bundle):
    """``particle,k,t,Y,Z,X`` for every particle; Z is empty at the last node."""
    bundle._require_single_node()
    N, M = bundle.N, bundle.M
    Y = np.stack([y[0] for y in bundle.Y], axis=1)
    X = np.stack([x[0] for x in bundle.X], axis=1)
    Z = np.concatenate([np.stack([z[0] for z in bundle.Z], axis=1),
                        np.full((N, 1), np.nan)], axis=1)
    return pd.DataFrame({
        "particle": np.repeat(np.arange(N), M + 1),
        "k": np.tile(np.arange(M + 1), N),
        "t": np.tile(bundle.grid.times, N),
        "Y": Y.ravel(),
        "Z": Z.ravel(),
        "X": X.ravel(),
    })


def summary_dict(bundle, cfg):
    frame = solution_frame(bundle)
    tol = reflection_tolerance(bundle, cfg.bisect_tol)
    return {
        "model_id": bundle.meta["model_id"],
        "N": bundle.N,
        "M": bundle.M,
        "scheme": bundle.meta["scheme"],
        "condexp": bundle.meta["condexp"],
        "sweeps": bundle.meta["sweeps"],
        "seed": cfg.seed,
        "K_T": bundle.K_T,
        "dK_T": _weighted(bundle.probs[-1], bundle.dK_T),
        "Y0_mean": float(frame["Y_mean"].iloc[0]),
        "constraint_min": bundle.constraint_min,
        "skorokhod_max": bundle.skorokhod_max,
        "bisect_tol": tol,
        "constraint_tol": bundle.constraint.m * tol,
        "skorokhod_tol": bundle.constraint.M * tol * bundle.K_T,
    }
