import numpy as np
import pytest

from conftest import brownian_model, load_fixture, model_document, parse_document
from config.config import RUNTIME_CONFIG, SOLVER_CONFIG
from models.config_loader import dump_config, load_config, runtime_seed, runtime_threads
from models.errors import (
    BadLipschitzBounds,
    InvalidField,
    MissingField,
    NonIncreasingConstraint,
    ParseError,
    TerminalConstraintViolated,
    UnknownFunctionName,
    ZDriverNeedsLinearH,
)
from models.function_registry import make_function
from models.model_spec import (
    ConstraintSpec,
    SolverConfig,
    TimeGrid,
    check_constraint,
    check_driver,
    validate_model,
)

SIN2 = {"name": "sin_affine", "a": 2.0, "c": 1.0, "m": 1.0, "M": 3.0}


# ----------------------------------------------------------------------------
# time grid
# ----------------------------------------------------------------------------
def test_uniform_grid():
    grid = TimeGrid.uniform(1.0, 4)
    assert grid.nodes == (0.0, 0.25, 0.5, 0.75, 1.0)
    assert grid.M == 4
    np.testing.assert_allclose(grid.dt, 0.25)
    assert grid.is_uniform()


@pytest.mark.parametrize("nodes", [(0.0, 0.5, 0.5, 1.0), (0.1, 1.0), (0.0,)])
def test_bad_grids_rejected(nodes):
    with pytest.raises(InvalidField):
        TimeGrid(nodes)


def test_refine_keeps_coarse_nodes():
    grid = TimeGrid((0.0, 0.3, 1.0))
    fine = grid.refine(4)
    assert fine.M == 8
    assert fine.nodes[4] == pytest.approx(0.3)
    assert fine.T == 1.0


# ----------------------------------------------------------------------------
# function registry
# ----------------------------------------------------------------------------
def test_unknown_function_name():
    with pytest.raises(UnknownFunctionName, match="known: .*sin_affine"):
        make_function({"name": "tanh", "a": 1.0}, "scalar")
    with pytest.raises(UnknownFunctionName, match="known: constant_driver, linear, sin_linear, zero"):
        make_function({"name": "affine"}, "driver")
    with pytest.raises(UnknownFunctionName):
        make_function({"name": "linear"}, "scalar")



def test_function_parameters_checked():
    with pytest.raises(MissingField):
        make_function({"name": "affine"}, "scalar")
    with pytest.raises(InvalidField):
        make_function({"name": "affine", "a": 1.0, "slope": 2.0}, "scalar")
    with pytest.raises(InvalidField):
        make_function({"name": "affine", "a": "one"}, "scalar")


def test_affine_recognition():
    assert make_function({"name": "sin_affine", "a": 2.0, "b": 1.0, "c": 0.0},
                         "scalar").affine_coefficients() == (2.0, 1.0)
    assert make_function({"name": "sin_affine", "a": 2.0, "c": 1.0},
                         "scalar").affine_coefficients() is None
    assert make_function({"name": "linear", "ky": 0.0}, "driver").is_zero_driver()


# ----------------------------------------------------------------------------
# constraint and driver checks
# ----------------------------------------------------------------------------
def test_sin_affine_with_true_bounds_accepted():
    spec, _ = parse_document(brownian_model(constraint=SIN2))
    check_constraint(spec.constraint)
    assert spec.constraint.m == 1.0 and spec.constraint.M == 3.0


def test_non_monotone_constraint_rejected():
    h = make_function({"name": "sin_affine", "a": 1.0, "c": 2.0}, "scalar")
    with pytest.raises(NonIncreasingConstraint):
        check_constraint(ConstraintSpec.general(h, 0.5, 1.5))


def test_declared_bounds_too_tight():
    h = make_function({"name": "kinked_affine", "a_neg": 0.5, "a_pos": 2.0}, "scalar")
    with pytest.raises(BadLipschitzBounds):
        check_constraint(ConstraintSpec.general(h, 0.5, 1.5))
    with pytest.raises(BadLipschitzBounds):
        check_constraint(ConstraintSpec.general(h, 2.0, 1.0))


def test_linear_constraint_needs_positive_slope():
    with pytest.raises(BadLipschitzBounds):
        check_constraint(ConstraintSpec.linear(-1.0, 0.0))


def test_z_driver_needs_linear_constraint():
    driver = {"name": "linear", "kz": 0.5, "mode": "yz", "lambda": 0.5}
    spec, cfg = parse_document(brownian_model(driver=driver, constraint=SIN2))
    with pytest.raises(ZDriverNeedsLinearH):
        check_driver(spec.driver, cfg.grid, spec.constraint)


def test_driver_lipschitz_constant_checked():
    driver = {"name": "linear", "ky": -1.0, "mode": "yonly", "lambda": 0.5}
    spec, cfg = parse_document(brownian_model(driver=driver))
    with pytest.raises(BadLipschitzBounds):
        check_driver(spec.driver, cfg.grid, spec.constraint)


def test_constant_mode_ignores_y_and_z():
    spec, _ = parse_document(brownian_model(
        driver={"name": "linear", "c": 1.0, "ky": 3.0, "mode": "constant"}))
    x = np.linspace(-1.0, 1.0, 5)
    np.testing.assert_allclose(spec.driver(0.0, x, 7.0, 7.0), np.ones(5))


def test_root_level_is_the_zero_of_h():
    h = make_function({"name": "sin_affine", "a": 1.0, "b": -1.0, "c": 0.5}, "scalar")
    c = ConstraintSpec.general(h, 0.5, 1.5)
    assert c.root_level > 0.0
    assert abs(float(c(c.root_level))) < 1e-12


# ----------------------------------------------------------------------------
# validation
# ----------------------------------------------------------------------------
def test_terminal_constraint_violated():
    spec, cfg = parse_document(brownian_model(terminal={"name": "affine", "a": 1.0, "b": -1.0}))
    with pytest.raises(TerminalConstraintViolated):
        validate_model(spec, cfg)


def test_grid_must_end_at_horizon():
    spec, cfg = parse_document(brownian_model())
    with pytest.raises(InvalidField):
        validate_model(spec, cfg.with_updates(grid=TimeGrid.uniform(2.0, 4)))


def test_validated_model_reads_through_to_spec(demo):
    assert demo.model_id == "demo"
    assert demo.constraint is demo.spec.constraint
    assert demo.terminal_mean > -demo.terminal_eps


# ----------------------------------------------------------------------------
# solver settings + documents
# ----------------------------------------------------------------------------
def test_solver_config_checks():
    grid = TimeGrid.uniform(1.0, 2)
    with pytest.raises(InvalidField):
        SolverConfig(N=0, grid=grid)
    with pytest.raises(InvalidField):
        SolverConfig(N=10, grid=grid, scheme="euler")
    capped = SolverConfig(N=10, grid=grid, max_iter=500)
    assert capped.max_iter == SOLVER_CONFIG["max_iter_cap"]
    with pytest.raises(InvalidField):
        SolverConfig(N=10, grid=grid, bisect_tol=0.0)
    with pytest.raises(InvalidField):
        SolverConfig(N=10, grid=grid, inner_picard=4, inner_max=3)


def test_bisect_tol_defaults_to_relative():
    _, cfg = load_fixture("demo.json")
    assert cfg.bisect_tol is None
    assert "bisect_tol" not in cfg.to_dict()
    _, tree = load_fixture("tree_base.json")
    assert tree.bisect_tol == 1e-12
    _, again = load_config(dump_config(*load_fixture("tree_base.json")))
    assert again.bisect_tol == 1e-12



def test_fixture_document_round_trips():
    spec, cfg = load_fixture("demo.json")
    spec2, cfg2 = load_config(dump_config(spec, cfg))
    assert spec2 == spec
    assert cfg2 == cfg
    assert dump_config(spec2, cfg2) == dump_config(spec, cfg)


def test_picard_scheme_document():
    solver = {"N": 50, "grid": {"steps": 5},
              "scheme": {"name": "picard", "max_iter": 20, "tol_fix": 1e-6}}
    _, cfg = parse_document(brownian_model(), solver)
    assert (cfg.scheme, cfg.max_iter, cfg.tol_fix) == ("picard", 20, 1e-6)

    with pytest.raises(MissingField):
        parse_document(brownian_model(), dict(solver, scheme="picard"))


def test_document_errors():
    with pytest.raises(ParseError):
        load_config("{not json")
    with pytest.raises(InvalidField):
        load_config(model_document(dict(brownian_model(), volatility=1.0)))
    with pytest.raises(MissingField):
        load_config('{"id": "x", "solver": {"N": 1, "grid": {"steps": 1}}}')
    with pytest.raises(MissingField):
        parse_document(brownian_model(driver={"name": "linear", "ky": -0.5, "mode": "yonly"}))


def test_env_overrides(monkeypatch):
    assert runtime_seed(7) == 7
    monkeypatch.setitem(RUNTIME_CONFIG, "seed", "42")
    assert runtime_seed(7) == 42
    monkeypatch.setitem(RUNTIME_CONFIG, "seed", "0x10")
    with pytest.raises(InvalidField):
        runtime_seed(7)

    monkeypatch.setitem(RUNTIME_CONFIG, "threads", "4")
    assert runtime_threads() == 4
    monkeypatch.setitem(RUNTIME_CONFIG, "threads", "0")
    with pytest.raises(InvalidField):
        runtime_threads()
