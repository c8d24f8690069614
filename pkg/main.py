#!/usr/bin/env python3
"""
=============================================================================
MRBSDE - MEAN-REFLECTED BSDE PARTICLE SOLVER
=============================================================================
Commands:
  solve     one particle solve, CSV/JSON dumps
  chaos     propagation-of-chaos sweep over N with fitted rates
  validate  invariant suites (reflection / solver / oracle)
  limit     reference solution of the limit equation

Exit codes: 0 success, 1 failed validation, 2 any model/config/numerical error
(printed as {"error": ..., "message": ...} on stdout).
=============================================================================
"""
import argparse
import json
import logging
import os
import sys
import time

# UTF-8 fix for Windows emoji
if sys.stdout.encoding and sys.stdout.encoding.lower() != "utf-8":
    try:
        sys.stdout.reconfigure(encoding="utf-8")
    except (AttributeError, ValueError):
        pass

# ============================================================
# PATH SETUP
# ============================================================
BASE_DIR = os.path.dirname(os.path.abspath(__file__))
sys.path.insert(0, BASE_DIR)

from config.config import RUNTIME_CONFIG
from harness.chaos_runner import run_chaos
from harness.validation_suite import run_validation
from models.config_loader import (
    config_to_dict,
    load_config_file,
    runtime_seed,
    runtime_threads,
)
from models.errors import InvalidField, MRBSDEError
from models.model_spec import validate_model
from oracle.limit_solver import closed_form_applicable, closed_form_linear, limit_solver
from reporting.report_printer import ReportPrinter
from solver.particle_solver import particles_frame, solution_frame, solve, summary_dict
from storage.result_store import ResultStore
from stochastics.brownian import euler_forward, generate_brownian, paths_frame

logger = logging.getLogger("mrbsde")
printer = ReportPrinter()


# ============================================================
# LOGGING
# ============================================================
def setup_logging(verbose=False):
    log_dir = RUNTIME_CONFIG["log_dir"]
    os.makedirs(log_dir, exist_ok=True)

    file_handler = logging.FileHandler(os.path.join(log_dir, RUNTIME_CONFIG["log_file"]),
                                       encoding="utf-8")
    file_handler.setLevel(logging.INFO)
    console = logging.StreamHandler(sys.stderr)
    console.setLevel(logging.INFO if verbose else logging.WARNING)

    logging.basicConfig(
        level=logging.INFO,
        format="%(asctime)s | %(levelname)s | %(message)s",
        handlers=[file_handler, console],
        force=True,
    )


# ============================================================
# HELPERS
# ============================================================
def load_checked(path, particles=None):
    """Config file -> validated model, with env overrides applied."""
    spec, cfg = load_config_file(path)
    updates = {"seed": runtime_seed(cfg.seed), "threads": runtime_threads(cfg.threads)}
    if particles is not None:
        updates["N"] = particles
    cfg = cfg.with_updates(**updates)
    return validate_model(spec, cfg), cfg


def parse_n_list(text):
    try:
        return [int(part) for part in text.split(",") if part.strip()]
    except ValueError as e:
        raise InvalidField(f"--n must be a comma-separated list of integers, got {text!r}") from e


def write_timing(store, started):
    store.write_json("timing.json", {"runtime_seconds": round(time.time() - started, 3)})


# ============================================================
# COMMANDS
# ============================================================
def cmd_solve(args):
    started = time.time()
    print("🧮 STEP 1: Loading and validating model...")
    checked, cfg = load_checked(args.config, args.N)
    print(f"  ✅ {checked.model_id}: N={cfg.N}, M={cfg.grid.M}, scheme={cfg.scheme}")

    print("⏪ STEP 2: Backward particle solve...")
    bundle = solve(checked, cfg)

    print("💾 STEP 3: Writing results...")
    store = ResultStore(args.out)
    summary = summary_dict(bundle, cfg)
    summary["config"] = config_to_dict(checked.spec, cfg)
    store.write_frame("solution.csv", solution_frame(bundle))
    store.write_json("summary.json", summary)
    if args.particles:
        inc = generate_brownian(cfg.grid, cfg.N, cfg.seed, stream=0, threads=cfg.threads)
        store.write_frame("particles.csv", particles_frame(bundle))
        store.write_frame("paths.csv", paths_frame(inc, euler_forward(checked, inc)))
    write_timing(store, started)

    print(printer.generate_solve_text(summary))
    return 0


def cmd_chaos(args):
    started = time.time()
    print("🧮 STEP 1: Loading and validating model...")
    checked, cfg = load_checked(args.config)
    N_list = parse_n_list(args.n) if args.n else None

    print("🔬 STEP 2: Running replications...")
    report = run_chaos(checked, cfg, N_list=N_list, reps=args.reps, master_seed=cfg.seed,
                       threads=cfg.threads, proxy_particles=args.proxy_n)

    print("💾 STEP 3: Writing report...")
    store = ResultStore(args.out)
    store.write_json("report.json", report.to_dict())
    points = report.points_frame()
    store.write_frame("chaos_points.csv", points)
    for key in ("err_Y", "err_K", "err_Z", "bound"):
        store.write_rate_file(key, points["N"], points[f"{key}_mean"], header=f"N {key}_mean")
    write_timing(store, started)

    print(printer.generate_chaos_text(report))
    return 0


def cmd_validate(args):
    print(f"🧪 Running validation suite: {args.suite}")
    results = run_validation(args.suite, args.fixtures)
    print(printer.generate_validation_text(results))
    failed = [r for r in results if not r.passed]
    for r in failed:
        logger.error("validation check failed: [%s] %s %s", r.suite, r.name, r.detail)
    return 1 if failed else 0


def cmd_limit(args):
    started = time.time()
    checked, cfg = load_checked(args.config)
    if closed_form_applicable(checked):
        solution = closed_form_linear(checked, cfg.grid)
    else:
        solution = limit_solver(checked, cfg)

    store = ResultStore(args.out)
    store.write_frame("limit.csv", solution.to_frame())
    store.write_json("limit.json", solution.to_dict())
    write_timing(store, started)

    print(printer.generate_limit_text(solution))
    return 0


# ============================================================
# CLI
# ============================================================
def build_parser():
    parser = argparse.ArgumentParser(prog="mrbsde",
                                     description="Mean-reflected BSDE particle solver")
    parser.add_argument("--verbose", action="store_true", help="log INFO to stderr")
    sub = parser.add_subparsers(dest="command", required=True)

    p = sub.add_parser("solve", help="solve one model")
    p.add_argument("--config", required=True)
    p.add_argument("--out", required=True)
    p.add_argument("--N", type=int, default=None, help="override the particle count")
    p.add_argument("--particles", action="store_true",
                   help="also write particles.csv and paths.csv")
    p.set_defaults(handler=cmd_solve)

    p = sub.add_parser("chaos", help="propagation-of-chaos sweep")
    p.add_argument("--config", required=True)
    p.add_argument("--n", default=None, help="comma-separated particle counts")
    p.add_argument("--reps", type=int, default=None)
    p.add_argument("--out", required=True)
    p.add_argument("--proxy-n", type=int, default=None,
                   help="particles of the proxy reference (z-dependent drivers); 0 disables it")
    p.set_defaults(handler=cmd_chaos)

    p = sub.add_parser("validate", help="run invariant suites")
    p.add_argument("--suite", default="all", help="reflection, solver, oracle or all")
    p.add_argument("--fixtures", default=None, help="fixtures directory")
    p.set_defaults(handler=cmd_validate)

    p = sub.add_parser("limit", help="reference solution of the limit equation")
    p.add_argument("--config", required=True)
    p.add_argument("--out", required=True)
    p.set_defaults(handler=cmd_limit)
    return parser


def main(argv=None):
    args = build_parser().parse_args(argv)
    setup_logging(args.verbose)

    print("=" * 60)
    print(f"🤖 MRBSDE :: {args.command}")
    print("=" * 60)

    try:
        return args.handler(args)
    except MRBSDEError as e:
        logger.error("%s: %s", e.code, e)
        print(json.dumps(e.to_dict(), sort_keys=True))
        return e.exit_code


if __name__ == "__main__":
    sys.exit(main())
