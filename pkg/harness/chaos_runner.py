# ============================================================================
# FILE: harness/chaos_runner.py
# ============================================================================
"""
Propagation-of-chaos sweeps.

For every particle count N the model is solved ``reps`` times with seeds
derived from a master seed. Particle 0 of each run is compared with the
reference (limit) solution along its own forward path; errors are averaged
over replications and log(err) is regressed on log(N).

Replication ``rep`` uses the same seed for every N, so particle 0 keeps its
Brownian path across the sweep.
"""

import logging
from dataclasses import dataclass, field

import numpy as np
import pandas as pd

from config.config import CHAOS_CONFIG
from models.errors import DegenerateInput, InvalidField, OracleUnavailable
from oracle.limit_solver import closed_form_applicable, closed_form_linear, limit_solver
from oracle.proxy_oracle import proxy_oracle
from scheduler.replication_pool import ReplicationPool, replication_seed
from solver.particle_solver import solve

logger = logging.getLogger(__name__)

SERIES = ("err_Y", "err_K", "err_Z")


@dataclass(frozen=True)
class ChaosReport:
    model_id: str
    N_list: list
    reps: int
    master_seed: int
    model_class: str
    per_N: list
    fits: dict
    bound_trend_slope: float
    bound_trend_ok: bool
    monotone_err_Y: bool
    oracle: dict
    notes: list = field(default_factory=list)

    def to_dict(self):
        return {
            "model_id": self.model_id,
            "N_list": list(self.N_list),
            "reps": self.reps,
            "master_seed": self.master_seed,
            "model_class": self.model_class,
            "per_N": self.per_N,
            "fits": self.fits,
            "bound_trend_slope": self.bound_trend_slope,
            "bound_trend_ok": self.bound_trend_ok,
            "monotone_err_Y": self.monotone_err_Y,
            "oracle": self.oracle,
            "notes": list(self.notes),
        }

    def points_frame(self):
        return pd.DataFrame(self.per_N)

    def all_within_band(self):
        return all(f["within_band"] for f in self.fits.values() if f["expected_band"] is not None)


# =============================================================================
# RATE FIT
# =============================================================================
def fit_rate(N_list, errors, floor=None):
    """OLS of log(err) on log(N). Returns (slope, intercept, r2).

    Nonpositive errors are replaced by ``floor`` (default: the smallest
    positive error) with a warning; if none is positive the input is
    degenerate.
    """
    N = np.asarray(N_list, dtype=float)
    err = np.asarray(errors, dtype=float)
    if N.shape != err.shape or N.size < 2:
        raise ValueError("need at least two (N, error) pairs of equal length")
    if np.any(N <= 0):
        raise ValueError("N values must be positive")

    bad = ~(err > 0)
    if np.all(bad):
        raise DegenerateInput("every error is nonpositive; no rate can be fitted")
    if np.any(bad):
        floor = float(err[~bad].min()) if floor is None else float(floor)
        logger.warning("%d nonpositive errors replaced by statistical floor %.3g",
                       int(bad.sum()), floor)
        err = np.where(bad, floor, err)

    x, y = np.log(N), np.log(err)
    slope, intercept = np.polyfit(x, y, 1)
    resid = y - (slope * x + intercept)
    ss_tot = float(np.sum((y - y.mean()) ** 2))
    r2 = 1.0 if ss_tot == 0.0 else 1.0 - float(np.sum(resid ** 2)) / ss_tot
    return float(slope), float(intercept), float(r2)


# =============================================================================
# ORACLE + MODEL CLASS
# =============================================================================
def select_oracle(checked, cfg=None, proxy_particles=None):
    """closed form if it applies, else the limit solver, else the high-N proxy."""
    cfg = checked.cfg if cfg is None else cfg
    if closed_form_applicable(checked):
        return closed_form_linear(checked, cfg.grid)
    if not checked.driver.uses_z:
        return limit_solver(checked, cfg)
    if proxy_particles is not None and proxy_particles <= 0:
        raise OracleUnavailable(f"no limit oracle for {checked.model_id} and the proxy is disabled")
    return proxy_oracle(checked, cfg, particles=proxy_particles)


def model_class(checked):
    c, d = checked.constraint, checked.driver
    if d.uses_z:
        return "linear_z"
    if c.is_linear and d.is_zero():
        return "linear"
    if not c.h.is_smooth():
        return "nonsmooth"
    return "smooth"


# =============================================================================
# REPLICATIONS
# =============================================================================
def replication_errors(checked, cfg, ref):
    """Squared errors of particle 0 against the reference, plus the bound monitor."""
    bundle = solve(checked, cfg)
    Y1, Z1 = bundle.particle_path(0)
    X1 = np.array([x[0, 0] for x in bundle.X])
    M = bundle.M

    ref_Y = np.array([ref.y_at(k, X1[k:k + 1])[0] for k in range(M + 1)])
    ref_Z = np.array([ref.z_at(k, X1[k:k + 1])[0] for k in range(M)])
    err_K = float(np.max((bundle.extended_K() - ref.extended_K()) ** 2))
    bound = max(float(np.mean(y ** 2)) for y in bundle.Y) + bundle.K_T ** 2
    return {
        "err_Y": float(np.max((Y1 - ref_Y) ** 2)),
        "err_K": err_K,
        "err_Z": float(np.sum(cfg.grid.dt * (Z1 - ref_Z) ** 2)),
        "bound": bound,
    }


def _aggregate(N, rows):
    out = {"N": int(N), "reps": len(rows)}
    for key in SERIES + ("bound",):
        vals = np.array([r[key] for r in rows])
        out[f"{key}_mean"] = float(vals.mean())
        out[f"{key}_se"] = float(vals.std(ddof=1) / np.sqrt(len(vals))) if len(vals) > 1 else 0.0
        out[f"{key}_median"] = float(np.median(vals))
    return out


def _check_sizes(N_list, reps):
    N_list = [int(n) for n in N_list]
    if len(N_list) < CHAOS_CONFIG["min_sizes"]:
        raise InvalidField(f"chaos sweep needs >= {CHAOS_CONFIG['min_sizes']} sizes, got {len(N_list)}")
    if any(n < 1 for n in N_list) or any(b <= a for a, b in zip(N_list, N_list[1:])):
        raise InvalidField(f"N list must be positive and strictly increasing, got {N_list}")
    if reps < 2:
        raise InvalidField(f"reps must be >= 2 for standard errors, got {reps}")
    return N_list


def run_chaos(checked, cfg=None, N_list=None, reps=None, master_seed=None,
              threads=1, proxy_particles=None, oracle=None):
    cfg = checked.cfg if cfg is None else cfg
    N_list = _check_sizes(CHAOS_CONFIG["n_list"] if N_list is None else N_list,
                          CHAOS_CONFIG["reps"] if reps is None else reps)
    reps = CHAOS_CONFIG["reps"] if reps is None else reps
    master_seed = cfg.seed if master_seed is None else master_seed

    ref = select_oracle(checked, cfg, proxy_particles) if oracle is None else oracle
    logger.info("chaos sweep %s: N=%s reps=%d oracle=%s",
                checked.model_id, N_list, reps, ref.provenance.get("oracle"))

    pool = ReplicationPool(threads)
    per_N = []
    for N in N_list:
        def job(rep, N=N):
            rep_cfg = cfg.with_updates(N=N, seed=replication_seed(master_seed, rep),
                                       condexp="regression", threads=1)
            return replication_errors(checked, rep_cfg, ref)
        per_N.append(_aggregate(N, pool.run(job, range(reps))))
        logger.info("N=%d: err_Y %.3g, err_K %.3g", N, per_N[-1]["err_Y_mean"],
                    per_N[-1]["err_K_mean"])

    cls = model_class(checked)
    bands = CHAOS_CONFIG["bands"][cls]
    fits = {}
    for key in SERIES:
        band = bands.get(key)
        means = [p[f"{key}_mean"] for p in per_N]
        n_floored = sum(1 for m in means if not m > 0)
        try:
            slope, intercept, r2 = fit_rate(N_list, means)
        except DegenerateInput as e:
            logger.warning("%s: %s", key, e)
            fits[key] = {"slope": None, "intercept": None, "r2": None,
                         "expected_band": None if band is None else list(band),
                         "within_band": None if band is None else False,
                         "n_floored": n_floored}
            continue
        fits[key] = {
            "slope": slope,
            "intercept": intercept,
            "r2": r2,
            "expected_band": None if band is None else list(band),
            "within_band": None if band is None else bool(band[0] <= slope <= band[1]),
            "n_floored": n_floored,
        }

    bound_slope = fit_rate(N_list, [p["bound_median"] for p in per_N])[0]
    medians = [p["err_Y_median"] for p in per_N]
    ses = [p["err_Y_se"] for p in per_N]
    monotone = all(medians[i + 1] <= medians[i] + 2.0 * ses[i + 1] for i in range(len(medians) - 1))

    notes = ["err_Z measures the diagonal Z^{i,i} component only"]
    if ref.provenance.get("oracle") == "proxy":
        notes.append("reference is a high-N particle proxy, not a limit solution")

    return ChaosReport(
        model_id=checked.model_id,
        N_list=N_list,
        reps=reps,
        master_seed=int(master_seed),
        model_class=cls,
        per_N=per_N,
        fits=fits,
        bound_trend_slope=bound_slope,
        bound_trend_ok=abs(bound_slope) <= CHAOS_CONFIG["bound_trend_tol"],
        monotone_err_Y=monotone,
        oracle=ref.to_dict(),
        notes=notes,
    )
