"""
=============================================================================
BROWNIAN INCREMENTS + EULER FORWARD PATHS
=============================================================================
Particle i draws its increments from its own counter-based Philox stream
keyed by (seed, stream, i), so a table never depends on how the particles
were split across worker threads.
=============================================================================
"""

import logging
from concurrent.futures import ThreadPoolExecutor, as_completed
from dataclasses import dataclass

import numpy as np
import pandas as pd

from models.errors import NonFiniteState, ShapeMismatch

logger = logging.getLogger(__name__)

BLOCK_SIZE = 4096


@dataclass(frozen=True)
class IncrementTable:
    dB: np.ndarray  # (N, M)
    grid: object
    seed: int
    stream: int

    @property
    def N(self):
        return self.dB.shape[0]

    @property
    def M(self):
        return self.dB.shape[1]


@dataclass(frozen=True)
class ForwardEnsemble:
    X: np.ndarray  # (N, M+1)
    grid: object


# =============================================================================
# RANDOM STREAMS
# =============================================================================
def particle_generator(seed, stream, particle):
    ss = np.random.SeedSequence(int(seed), spawn_key=(int(stream), int(particle)))
    return np.random.Generator(np.random.Philox(ss))


def _fill_block(out, ids, seed, stream, sqrt_dt):
    for row, pid in enumerate(ids):
        out[row] = particle_generator(seed, stream, pid).standard_normal(len(sqrt_dt)) * sqrt_dt
    return len(ids)


def generate_brownian(grid, N, seed, stream=0, threads=1, particle_ids=None):
    """Gaussian increments dB[i][k] ~ N(0, dt_k), reproducible per (seed, stream, i).

    ``particle_ids`` picks which streams fill the rows (default 0..N-1); row i
    of the table is then stream ``particle_ids[i]``.
    """
    if N < 1:
        raise ValueError(f"N must be >= 1, got {N}")
    ids = np.arange(N) if particle_ids is None else np.asarray(particle_ids, dtype=np.int64)
    if ids.shape != (N,):
        raise ShapeMismatch(f"particle_ids must have length {N}")

    sqrt_dt = np.sqrt(grid.dt)
    dB = np.empty((N, grid.M))
    blocks = [slice(lo, min(lo + BLOCK_SIZE, N)) for lo in range(0, N, BLOCK_SIZE)]

    if threads <= 1 or len(blocks) == 1:
        for blk in blocks:
            _fill_block(dB[blk], ids[blk], seed, stream, sqrt_dt)
    else:
        with ThreadPoolExecutor(max_workers=threads) as executor:
            futures = [executor.submit(_fill_block, dB[blk], ids[blk], seed, stream, sqrt_dt)
                       for blk in blocks]
            for future in as_completed(futures):
                future.result()

    return IncrementTable(dB, grid, int(seed), int(stream))


# =============================================================================
# EULER-MARUYAMA
# =============================================================================
def euler_step(model, x, dt, dB):
    with np.errstate(over="ignore", invalid="ignore"):
        nxt = x + model.b_fwd(x) * dt + model.sigma_fwd(x) * dB
    if not np.all(np.isfinite(nxt)):
        raise NonFiniteState("forward state overflowed or became NaN")
    return nxt


def euler_forward_raw(model, dB, grid):
    dB = np.asarray(dB, dtype=float)
    if dB.ndim != 2 or dB.shape[1] != grid.M:
        raise ShapeMismatch(f"increments of shape {dB.shape} do not match {grid.M} steps")
    X = np.empty((dB.shape[0], grid.M + 1))
    X[:, 0] = model.x0_init
    for k, dt in enumerate(grid.dt):
        X[:, k + 1] = euler_step(model, X[:, k], dt, dB[:, k])
    return X


def euler_forward(model, inc):
    """X[i][k+1] = X[i][k] + b(X[i][k]) dt_k + sigma(X[i][k]) dB[i][k]."""
    return ForwardEnsemble(euler_forward_raw(model, inc.dB, inc.grid), inc.grid)


def paths_frame(inc, fwd):
    """Long table ``particle,k,t,dB,X``; dB is the increment leaving node k."""
    N, M = inc.dB.shape
    dB = np.concatenate([inc.dB, np.full((N, 1), np.nan)], axis=1)
    return pd.DataFrame({
        "particle": np.repeat(np.arange(N), M + 1),
        "k": np.tile(np.arange(M + 1), N),
        "t": np.tile(inc.grid.times, N),
        "dB": dB.ravel(),
        "X": fwd.X.ravel(),
    })
