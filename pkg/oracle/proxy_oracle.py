"""
High-N particle proxy for the limit law, used when no limit solver exists
(z-dependent drivers). Y and Z at every node are summarized by regressions
on the forward state so particles of other runs can be compared with them.
"""

import logging

import numpy as np

from config.config import ORACLE_CONFIG
from oracle.limit_solver import LimitSolution
from regression.condexp import fit_condexp_reducing
from solver.particle_solver import engine_from_increments, solve_with_engine
from stochastics.brownian import generate_brownian

logger = logging.getLogger(__name__)


def proxy_oracle(checked, cfg=None, particles=None):
    cfg = checked.cfg if cfg is None else cfg
    n = int(ORACLE_CONFIG["proxy_particles"] if particles is None else particles)
    proxy_cfg = cfg.with_updates(N=n, condexp="regression")
    logger.warning("using a %d-particle proxy as reference for %s", n, checked.model_id)

    inc = generate_brownian(proxy_cfg.grid, n, proxy_cfg.seed,
                            stream=ORACLE_CONFIG["proxy_stream"], threads=proxy_cfg.threads)
    bundle = solve_with_engine(checked, proxy_cfg, engine_from_increments(checked, proxy_cfg, inc))

    M = bundle.M
    y_fits = [fit_condexp_reducing(bundle.X[k][0], bundle.Y[k][0], cfg.basis_degree)
              for k in range(M + 1)]
    z_fits = [fit_condexp_reducing(bundle.X[k][0], bundle.Z[k][0], cfg.basis_degree)
              for k in range(M)]

    def value_fn(j, x):
        return y_fits[j].predict(np.atleast_1d(x))

    def z_fn(j, x):
        return z_fits[j].predict(np.atleast_1d(x))

    Y = np.stack([y[0] for y in bundle.Y])
    return LimitSolution(
        grid=cfg.grid,
        factor=1,
        K=np.array([float(k[0]) for k in bundle.K]),
        psi=np.full(M + 1, np.nan),
        y_mean=Y.mean(axis=1),
        y_var=Y.var(axis=1),
        value_fn=value_fn,
        z_fn=z_fn,
        terminal_jump=float(bundle.dK_T[0]),
        provenance={
            "oracle": "proxy",
            "model_id": checked.model_id,
            "proxy_particles": n,
            "proxy_stream": ORACLE_CONFIG["proxy_stream"],
            "note": "reference is a high-N particle run, not a limit solution",
        },
    )
