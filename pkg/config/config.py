# ============================================================================
# MRBSDE PARTICLE SOLVER - DEFAULT SETTINGS (ENV OVERRIDABLE)
# ============================================================================

import os
from dotenv import load_dotenv

# Load ENV variables (.env next to the repo root, if any)
load_dotenv()

BASE_DIR = os.path.dirname(os.path.dirname(os.path.abspath(__file__)))

# ============================================================================
# SOLVER CONFIG
# ============================================================================

SOLVER_CONFIG = {
    "basis_degree": 3,
    # None: 1e-10 (1 + bracket width), see REFLECTION_CONFIG
    "bisect_tol": None,

    # implicit y-argument of the driver
    "inner_picard": 3,
    "inner_tol": 1e-3,
    "inner_max": 50,

    # PicardOuter scheme
    "max_iter": 50,
    "max_iter_cap": 50,
    "tol_fix": 1e-8,

    "scheme": "perstep",
    "condexp": "regression",
}

# ============================================================================
# MODEL VALIDATION CONFIG
# ============================================================================

MODEL_CHECK_CONFIG = {
    "probe_pairs": 1000,
    "probe_range": (-10.0, 10.0),
    "probe_steps": (1e-3, 1e-1, 1.0),
    "probe_rel_slack": 1e-9,

    # statistical check of E[h(xi)] >= 0
    "terminal_samples": 10_000,
    "terminal_sigmas": 3.0,
    "validation_stream": 1,
}

# ============================================================================
# REFLECTION CONFIG
# ============================================================================

REFLECTION_CONFIG = {
    "gauss_hermite_nodes": 64,
    "relative_tol": 1e-10,
    "max_bracket_doublings": 64,
}

# ============================================================================
# REGRESSION CONFIG
# ============================================================================

REGRESSION_CONFIG = {
    "std_floor": 1e-12,
    "rank_tol": 1e-10,
}

# ============================================================================
# ORACLE CONFIG
# ============================================================================

ORACLE_CONFIG = {
    "tree_max_bits": 20,

    # limit solver lattice
    "refine_factor": 10,
    "lattice_points": 1024,
    "lattice_sigmas": 8.0,
    "picard_tol": 1e-10,
    "max_sweeps": 50,
    "pilot_paths": 4096,
    "pilot_stream": 7,

    # high-N proxy for z-dependent drivers
    "proxy_particles": 1_000_000,
    "proxy_stream": 3,
}

# ============================================================================
# CHAOS SWEEP CONFIG
# ============================================================================

CHAOS_CONFIG = {
    "reps": 32,
    "min_sizes": 4,
    "n_list": [250, 500, 1000, 2000, 4000, 8000],

    # fitted slope bands per model class
    "bands": {
        "smooth": {"err_Y": (-1.5, -0.4)},
        "nonsmooth": {"err_Y": (-1.0, -0.2)},
        "linear_z": {"err_Y": (-1.3, -0.3), "err_K": (-10.0, -0.3)},
        "linear": {"err_K": (-10.0, -0.4)},
    },
    "bound_trend_tol": 0.1,
}

# ============================================================================
# RUNTIME CONFIG (ENV SECURED)
# ============================================================================

RUNTIME_CONFIG = {
    "seed": os.getenv("MRBSDE_SEED"),
    "threads": os.getenv("MRBSDE_THREADS"),
    "log_dir": os.getenv("MRBSDE_LOG_DIR", os.path.join(BASE_DIR, "logs")),
    "log_file": "mrbsde.log",
    "fixtures_dir": os.path.join(BASE_DIR, "fixtures"),
}

# ============================================================================
# OUTPUT CONFIG
# ============================================================================

OUTPUT_CONFIG = {
    "float_format": "%.12g",
    "json_indent": 2,
    "rate_file_suffix": ".dat",
}
