# ============================================================================
# FILE: harness/validation_suite.py
# ============================================================================
"""
Invariant suites run by ``mrbsde validate``.

    reflection : properties of L over randomized samples per constraint family
    solver     : exact-tree equivalence, flatness, decomposition, determinism,
                 perstep vs picard agreement
    oracle     : agreement of the two limit oracles, K bound, golden tree file
"""

import json
import logging
import os
from dataclasses import dataclass

import numpy as np

from config.config import RUNTIME_CONFIG
from models.config_loader import load_config_file, parse_model
from models.errors import InvalidField, MRBSDEError
from models.function_registry import make_function
from models.model_spec import ConstraintSpec, TimeGrid, validate_model
from oracle.limit_solver import closed_form_linear, limit_solver
from oracle.tree_oracle import tree_solve_exact
from reflection.reflection_map import bisect_offsets, linear_offsets
from regression.condexp import TreeEngine
from solver.particle_solver import build_engine, solve_with_engine

logger = logging.getLogger(__name__)

EXACT_TOL = 1e-10
TREE_BISECT_TOL = 1e-12
TREE_FIXTURES = ("tree_base.json", "tree_yonly.json")
GOLDEN_FILE = os.path.join("golden", "tree_n1_m1.json")


@dataclass(frozen=True)
class CheckResult:
    suite: str
    name: str
    passed: bool
    detail: str = ""


def _check(suite, name, passed, detail=""):
    result = CheckResult(suite, name, bool(passed), detail)
    (logger.info if result.passed else logger.error)("[%s] %s: %s %s", suite, name,
                                                     "ok" if result.passed else "FAILED", detail)
    return result


# =============================================================================
# REFLECTION
# =============================================================================
REFLECTION_FAMILIES = (
    ("linear{1,0}", ConstraintSpec.linear(1.0, 0.0)),
    ("linear{2,-2}", ConstraintSpec.linear(2.0, -2.0)),
    ("sin_affine{2,0,1}", ConstraintSpec.general(
        make_function({"name": "sin_affine", "a": 2.0, "c": 1.0}, "scalar"), 1.0, 3.0)),
    ("sin_affine{1,0,0.5}", ConstraintSpec.general(
        make_function({"name": "sin_affine", "a": 1.0, "c": 0.5}, "scalar"), 0.5, 1.5)),
    ("kinked{0.5,2,0.3}", ConstraintSpec.general(
        make_function({"name": "kinked_affine", "a_neg": 0.5, "a_pos": 2.0, "b": 0.3}, "scalar"),
        0.5, 2.0)),
)


def reflection_suite(rows=10_000, width=6, tol=1e-10, seed=20240611):
    rng = np.random.default_rng(seed)
    results = []
    for name, c in REFLECTION_FAMILIES:
        u = rng.normal(-0.5, 2.0, size=(rows, width))
        v = u + rng.normal(0.0, 0.5, size=(rows, width))
        up = u + np.abs(rng.normal(0.0, 0.5, size=(rows, width)))

        off, resid, _, _ = bisect_offsets(u, c, tol)
        off_v = bisect_offsets(v, c, tol)[0]
        off_up = bisect_offsets(up, c, tol)[0]
        off_perm = bisect_offsets(rng.permuted(u, axis=1), c, tol)[0]
        abs_mean = np.abs(u).mean(axis=1)

        pushed = off > tol
        results += [
            _check("reflection", f"{name} nonnegative", np.all(off >= 0.0)),
            _check("reflection", f"{name} permutation",
                   np.all(np.abs(off - off_perm) <= 2 * tol)),
            _check("reflection", f"{name} monotone", np.all(off_up <= off + tol)),
            _check("reflection", f"{name} complementarity",
                   np.all(resid >= -c.m * tol)
                   and np.all(np.abs(resid[pushed]) <= c.M * tol * (1.0 + 1e-6))),
            _check("reflection", f"{name} lipschitz",
                   np.all(np.abs(off - off_v)
                          <= (c.M / c.m) * np.abs(u - v).mean(axis=1) + 2 * tol)),
            _check("reflection", f"{name} majpsi bound",
                   np.all(off <= c.root_level + (c.M / c.m) * abs_mean + tol)),
        ]
        if c.is_linear:
            exact = linear_offsets(u, c.a, c.b)[0]
            results.append(_check("reflection", f"{name} linear consistency",
                                  np.all(np.abs(off - exact) <= tol)))
    return results


# =============================================================================
# SOLVER
# =============================================================================
def _tree_cases():
    for N in (1, 2, 3):
        for M in (1, 2, 3, 4):
            if N * M <= 12:
                yield N, M


def _max_gap(a_list, b_list):
    return max(float(np.max(np.abs(a - b))) for a, b in zip(a_list, b_list))


def _decomposition_gap(checked, engine, bundle):
    """max over nodes of the spread across particles of Y - U."""
    M = bundle.M
    driver = checked.driver
    U = bundle.Y[M]
    gap = 0.0
    for k in range(M - 1, -1, -1):
        t, dt = float(bundle.grid.nodes[k]), float(bundle.grid.dt[k])
        U = engine.condexp(k, U) + dt * driver(t, engine.X(k), 0.0, 0.0)
        D = bundle.Y[k] - U
        gap = max(gap, float(np.max(D.max(axis=1) - D.min(axis=1))))
    return gap


def scheme_gap(checked, cfg):
    """Sup-node gap between the perstep and picard schemes on one engine."""
    engine = build_engine(checked, cfg)
    perstep = solve_with_engine(checked, cfg.with_updates(scheme="perstep"), engine)
    picard = solve_with_engine(checked, cfg.with_updates(scheme="picard"), engine)
    return _max_gap(perstep.Y, picard.Y)


def solver_suite(fixtures_dir):
    results = []
    for fixture in TREE_FIXTURES:
        spec, base = load_config_file(os.path.join(fixtures_dir, fixture))
        for N, M in _tree_cases():
            label = f"{spec.model_id} N={N} M={M}"
            cfg = base.with_updates(N=N, grid=TimeGrid.uniform(spec.T, M),
                                    condexp="tree", bisect_tol=TREE_BISECT_TOL)
            checked = validate_model(spec, cfg)
            engine = build_engine(checked, cfg)
            bundle = solve_with_engine(checked, cfg, engine)
            exact = tree_solve_exact(checked, cfg.grid, N, bisect_tol=TREE_BISECT_TOL,
                                     inner_picard=cfg.inner_picard, inner_tol=cfg.inner_tol,
                                     inner_max=cfg.inner_max)

            gap = max(_max_gap(bundle.Y, exact.Y), _max_gap(bundle.K, exact.K),
                      float(np.max(np.abs(bundle.dK_T - exact.dK_T))))
            results.append(_check("solver", f"{label} tree equivalence", gap <= EXACT_TOL,
                                  f"gap {gap:.3g}"))

            c = checked.constraint
            K_max = max(float(np.max(bundle.K[-1] + bundle.dK_T)), 1.0)
            results.append(_check(
                "solver", f"{label} flatness",
                bundle.constraint_min >= -c.m * TREE_BISECT_TOL
                and bundle.skorokhod_max <= c.M * TREE_BISECT_TOL * K_max + 1e-14,
                f"constraint_min {bundle.constraint_min:.3g}, skorokhod_max {bundle.skorokhod_max:.3g}"))
            results.append(_check("solver", f"{label} K monotone",
                                  all(np.all(d >= 0.0) for d in bundle.dK)))

            if checked.driver.mode == "constant" and isinstance(engine, TreeEngine):
                gap = _decomposition_gap(checked, engine, bundle)
                results.append(_check("solver", f"{label} decomposition", gap <= EXACT_TOL,
                                      f"spread {gap:.3g}"))

    spec, cfg = load_config_file(os.path.join(fixtures_dir, "demo.json"))
    cfg = cfg.with_updates(N=min(cfg.N, 200))
    checked = validate_model(spec, cfg)
    a = solve_with_engine(checked, cfg, build_engine(checked, cfg))
    b = solve_with_engine(checked, cfg, build_engine(checked, cfg))
    same = all(np.array_equal(x, y) for x, y in zip(a.Y + a.K, b.Y + b.K))
    results.append(_check("solver", "determinism", same))

    # the schemes differ by where the driver sees y, an O(dt) effect
    cfg = cfg.with_updates(N=1000)
    checked = validate_model(spec, cfg)
    gap = scheme_gap(checked, cfg)
    band = 5.0 * cfg.tol_fix + float(np.max(cfg.grid.dt))
    results.append(_check("solver", "perstep vs picard (regression)", gap <= band,
                          f"gap {gap:.3g}, band {band:.3g}"))
    return results


# =============================================================================
# ORACLE
# =============================================================================
def oracle_suite(fixtures_dir):
    results = []

    spec, cfg = load_config_file(os.path.join(fixtures_dir, "linear_closed_form.json"))
    checked = validate_model(spec, cfg)
    closed = closed_form_linear(checked, cfg.grid)
    lim = limit_solver(checked, cfg)
    k_gap = float(np.max(np.abs(lim.K_coarse() - closed.K_coarse())))
    m_gap = float(np.max(np.abs(lim.y_mean[:: lim.factor] - closed.y_mean)))
    results.append(_check("oracle", "closed form vs limit solver",
                          max(k_gap, m_gap) <= 1e-8, f"K gap {k_gap:.3g}, mean gap {m_gap:.3g}"))

    spec, cfg = load_config_file(os.path.join(fixtures_dir, "demo.json"))
    checked = validate_model(spec, cfg)
    lim = limit_solver(checked, cfg)
    bound = lim.provenance["K_bound"]
    results.append(_check("oracle", "K upper bound",
                          np.all(np.diff(lim.K) >= 0.0) and lim.K_T <= bound + 1e-8,
                          f"K_T {lim.K_T:.6g} <= {bound:.6g}"))

    results.append(_golden_check(os.path.join(fixtures_dir, GOLDEN_FILE)))
    return results


def _golden_check(path):
    try:
        with open(path, "r", encoding="utf-8") as fh:
            golden = json.load(fh)
        spec = parse_model(golden["model"], golden.get("id", "golden"))
        grid = TimeGrid(tuple(golden["grid"]))
        bundle = tree_solve_exact(spec, grid, golden["N"], bisect_tol=TREE_BISECT_TOL)
        expected = golden["expected"]
        gaps = [
            _max_gap(bundle.Y, [np.asarray(y, dtype=float) for y in expected["Y"]]),
            _max_gap(bundle.dK, [np.asarray(d, dtype=float) for d in expected["dK"]]),
            float(np.max(np.abs(bundle.dK_T - np.asarray(expected["dK_T"], dtype=float)))),
        ]
    except (OSError, KeyError, TypeError, ValueError, MRBSDEError) as e:
        return _check("oracle", "golden tree file", False, f"{path}: {e}")
    return _check("oracle", "golden tree file", max(gaps) <= 1e-12, f"gap {max(gaps):.3g}")


# =============================================================================
# DISPATCH
# =============================================================================
SUITES = {
    "reflection": lambda fixtures_dir: reflection_suite(),
    "solver": solver_suite,
    "oracle": oracle_suite,
}


def run_validation(suite=None, fixtures_dir=None):
    fixtures_dir = RUNTIME_CONFIG["fixtures_dir"] if fixtures_dir is None else fixtures_dir
    names = list(SUITES) if suite in (None, "all") else [suite]
    unknown = [n for n in names if n not in SUITES]
    if unknown:
        raise InvalidField(f"unknown suite {unknown[0]!r}; choose from {', '.join(SUITES)} or all")
    results = []
    for name in names:
        results.extend(SUITES[name](fixtures_dir))
    return results
