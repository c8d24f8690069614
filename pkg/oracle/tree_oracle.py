# ============================================================================
# FILE: oracle/tree_oracle.py
# ============================================================================
"""
Brute-force solution of the particle system on the Rademacher tree.

Every joint path of the N walks is enumerated explicitly (one row per leaf)
and conditional expectations are group averages over leaves that share a
prefix. Nothing here goes through the conditional-expectation engines of
the solver.

Constant drivers use the decomposition Y = U + S, with U the conditional
expectation of theta + remaining integral of f and S the Snell envelope of
psi_k = L(U_k). Other drivers run the per-step recursion on leaf groups.
"""

import itertools
import logging
from dataclasses import replace

import numpy as np

from config.config import ORACLE_CONFIG, SOLVER_CONFIG
from models.errors import TreeTooLarge
from reflection.reflection_map import reflection_rows
from solver.particle_solver import SolutionBundle, driver_part, skorokhod_residual, terminal_adjust
from solver.snell import snell_envelope

logger = logging.getLogger(__name__)


def _leaf_codes(N, M):
    """(L, M) child codes of every leaf, lexicographic = node numbering."""
    codes = np.array(list(itertools.product(range(2 ** N), repeat=M)), dtype=np.int64)
    return codes.reshape(-1, M)


def _leaf_paths(model, grid, N):
    codes = _leaf_codes(N, grid.M)
    bits = (codes[:, :, None] >> np.arange(N)[None, None, :]) & 1
    dB = np.where(bits == 1, 1.0, -1.0) * np.sqrt(grid.dt)[None, :, None]  # (L, M, N)
    X = np.empty((codes.shape[0], grid.M + 1, N))
    X[:, 0, :] = model.x0_init
    for k, dt in enumerate(grid.dt):
        x = X[:, k, :]
        X[:, k + 1, :] = x + model.b_fwd(x) * dt + model.sigma_fwd(x) * dB[:, k, :]
    return X, dB


def _group_mean(values, groups):
    """Average consecutive blocks of ``values`` (rows) into ``groups`` rows."""
    size = values.shape[0] // groups
    return values.reshape((groups, size) + values.shape[1:]).mean(axis=1)


def _nodes(leaf_values, n_nodes):
    """Node view of a leaf array that is constant on each depth-k block."""
    return leaf_values[:: leaf_values.shape[0] // n_nodes]


def tree_solve_exact(model, grid, N, bisect_tol=1e-12,
                     inner_picard=SOLVER_CONFIG["inner_picard"],
                     inner_tol=SOLVER_CONFIG["inner_tol"],
                     inner_max=SOLVER_CONFIG["inner_max"]):
    M = grid.M
    if N * M > ORACLE_CONFIG["tree_max_bits"]:
        raise TreeTooLarge(f"N*M = {N * M} exceeds {ORACLE_CONFIG['tree_max_bits']} tree bits")

    B = 2 ** N
    n_nodes = [B ** k for k in range(M + 1)]
    X_leaf, dB_leaf = _leaf_paths(model, grid, N)
    X = [_nodes(X_leaf[:, k, :], n_nodes[k]) for k in range(M + 1)]
    c = model.constraint
    driver = model.driver

    xi = model.terminal(X_leaf[:, M, :])
    theta, psi_T = terminal_adjust(xi, c, bisect_tol)

    def condexp(k, values_next):
        return _group_mean(values_next, n_nodes[k])

    def z_of(k, values_next):
        dB = _nodes(dB_leaf[:, k, :], n_nodes[k + 1])
        return condexp(k, values_next * dB) / grid.dt[k]

    Y = [None] * (M + 1)
    Z = [None] * M
    dK = [None] * M
    Y[M] = theta

    if driver.mode == "constant":
        # U_k = E_k[theta + sum_{j >= k} dt_j f_j]
        running = theta.copy()
        U = [None] * (M + 1)
        U[M] = theta
        for k in range(M - 1, -1, -1):
            f_leaf = driver(grid.nodes[k], X_leaf[:, k, :], 0.0, 0.0)
            running = running + grid.dt[k] * f_leaf
            U[k] = _group_mean(running, n_nodes[k])
        psi = [reflection_rows(U[k], c, bisect_tol) for k in range(M)] + [np.zeros(n_nodes[M])]
        snell = snell_envelope(psi, condexp)
        for k in range(M):
            Y[k] = U[k] + snell.S[k][:, None]
            dK[k] = snell.dK[k]
        for k in range(M):
            Z[k] = z_of(k, Y[k + 1])
    else:
        for k in range(M - 1, -1, -1):
            cont = condexp(k, Y[k + 1])
            Z[k] = z_of(k, Y[k + 1])
            t, dt = float(grid.nodes[k]), float(grid.dt[k])
            y = driver_part(driver, t, X[k], cont, Z[k], dt, k, inner_picard, inner_tol, inner_max)
            dK[k] = reflection_rows(y, c, bisect_tol)
            Y[k] = y + dK[k][:, None]

    K = [np.zeros(1)]
    for k in range(M):
        K.append(np.repeat(K[k] + dK[k], B))

    bundle = SolutionBundle(
        Y=Y, Z=Z, K=K, dK=dK,
        dK_T=np.asarray(psi_T, dtype=float),
        X=X,
        grid=grid,
        probs=[np.full(n, 1.0 / n) for n in n_nodes],
        constraint=c,
        meta={
            "model_id": getattr(model, "model_id", "model"),
            "scheme": "exact_tree",
            "condexp": "enumeration",
            "sweeps": 1,
            "N": N,
            "M": M,
            "seed": None,
        },
    )
    cmin, smax = skorokhod_residual(bundle)
    logger.info("exact tree: N=%d M=%d leaves=%d K_T=%.6g", N, M, X_leaf.shape[0], bundle.K_T)
    return replace(bundle, constraint_min=cmin, skorokhod_max=smax)
