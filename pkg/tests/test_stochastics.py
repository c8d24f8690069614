import numpy as np
import pytest

from conftest import brownian_model, parse_document
from models.errors import NonFiniteState, ShapeMismatch, TreeTooLarge
from models.model_spec import TimeGrid
from stochastics.binary_tree import build_binary_tree, tree_forward
from stochastics.brownian import (
    BLOCK_SIZE,
    euler_forward,
    euler_forward_raw,
    generate_brownian,
    paths_frame,
)


def _model(drift=0.0, vol=1.0, x0=0.0):
    model = brownian_model(x0=x0)
    model["drift"] = {"name": "constant", "c": drift}
    model["diffusion"] = {"name": "constant", "c": vol}
    return parse_document(model)[0]


# ----------------------------------------------------------------------------
# brownian increments
# ----------------------------------------------------------------------------
def test_increments_are_reproducible():
    grid = TimeGrid.uniform(1.0, 5)
    a = generate_brownian(grid, 50, seed=9)
    b = generate_brownian(grid, 50, seed=9)
    assert a.dB.shape == (50, 5)
    np.testing.assert_array_equal(a.dB, b.dB)
    assert not np.array_equal(a.dB, generate_brownian(grid, 50, seed=9, stream=1).dB)


def test_particle_stream_depends_only_on_its_index():
    grid = TimeGrid.uniform(1.0, 3)
    full = generate_brownian(grid, 10, seed=3).dB
    short = generate_brownian(grid, 4, seed=3).dB
    picked = generate_brownian(grid, 3, seed=3, particle_ids=[7, 2, 5]).dB
    np.testing.assert_array_equal(short, full[:4])
    np.testing.assert_array_equal(picked, full[[7, 2, 5]])


def test_threads_do_not_change_the_table():
    grid = TimeGrid.uniform(1.0, 2)
    N = BLOCK_SIZE + 100
    serial = generate_brownian(grid, N, seed=5, threads=1).dB
    threaded = generate_brownian(grid, N, seed=5, threads=3).dB
    np.testing.assert_array_equal(serial, threaded)


def test_increment_moments():
    N, dt = 20_000, 0.01
    dB = generate_brownian(TimeGrid.uniform(0.02, 2), N, seed=1).dB
    for k in range(2):
        assert abs(dB[:, k].mean()) <= 4.0 * np.sqrt(dt / N)
        assert abs(dB[:, k].var(ddof=1) - dt) <= 4.0 * dt * np.sqrt(2.0 / N)


def test_particle_ids_must_match_N():
    with pytest.raises(ShapeMismatch):
        generate_brownian(TimeGrid.uniform(1.0, 2), 3, seed=0, particle_ids=[0, 1])


# ----------------------------------------------------------------------------
# euler
# ----------------------------------------------------------------------------
def test_euler_without_noise():
    grid = TimeGrid.uniform(1.0, 4)
    inc = generate_brownian(grid, 6, seed=2)
    np.testing.assert_allclose(euler_forward(_model(0.0, 0.0, x0=0.3), inc).X, 0.3)
    X = euler_forward(_model(1.0, 0.0, x0=0.3), inc).X
    np.testing.assert_allclose(X, np.broadcast_to(0.3 + grid.times, X.shape))


def test_euler_pure_brownian():
    grid = TimeGrid.uniform(1.0, 4)
    inc = generate_brownian(grid, 6, seed=2)
    X = euler_forward(_model(0.0, 1.0, x0=-1.0), inc).X
    np.testing.assert_allclose(X[:, 1:], -1.0 + np.cumsum(inc.dB, axis=1))
    assert np.all(X[:, 0] == -1.0)


def test_euler_overflow_detected():
    model = brownian_model(x0=10.0)
    model["drift"] = {"name": "exponential", "rate": 50.0}
    spec = parse_document(model)[0]
    grid = TimeGrid.uniform(1.0, 3)
    with pytest.raises(NonFiniteState):
        euler_forward_raw(spec, np.zeros((2, 3)), grid)


def test_euler_shape_checked():
    with pytest.raises(ShapeMismatch):
        euler_forward_raw(_model(), np.zeros((2, 3)), TimeGrid.uniform(1.0, 4))


def test_paths_frame_layout():
    grid = TimeGrid.uniform(1.0, 2)
    inc = generate_brownian(grid, 3, seed=0)
    frame = paths_frame(inc, euler_forward(_model(), inc))
    assert list(frame.columns) == ["particle", "k", "t", "dB", "X"]
    assert len(frame) == 9
    assert frame["dB"].isna().sum() == 3


# ----------------------------------------------------------------------------
# binary tree
# ----------------------------------------------------------------------------
def test_one_particle_one_step_tree():
    tree = build_binary_tree(TimeGrid.uniform(1.0, 1), 1)
    assert tree.n_nodes(1) == 2
    np.testing.assert_allclose(tree.node_probs(1), [0.5, 0.5])
    np.testing.assert_allclose(tree.increments(0)[:, 0], [-1.0, 1.0])


def test_two_step_tree_probabilities():
    tree = build_binary_tree(TimeGrid.uniform(1.0, 2), 1)
    np.testing.assert_allclose(tree.node_probs(2), 0.25)


def test_two_particle_marginals_are_uniform():
    tree = build_binary_tree(TimeGrid.uniform(1.0, 1), 2)
    signs = tree.signs
    assert signs.shape == (4, 2)
    np.testing.assert_array_equal(signs[1], [1.0, -1.0])
    np.testing.assert_allclose(tree.child_probs @ signs, 0.0)
    np.testing.assert_allclose(tree.child_probs @ (signs == 1.0), 0.5)


def test_tree_increment_moments_exact():
    tree = build_binary_tree(TimeGrid((0.0, 0.3, 1.0)), 2)
    for k in range(2):
        inc = tree.increments(k)
        np.testing.assert_allclose(tree.child_probs @ inc, 0.0, atol=1e-15)
        np.testing.assert_allclose(tree.child_probs @ inc ** 2, tree.grid.dt[k], rtol=1e-14)


def test_tree_guard():
    with pytest.raises(TreeTooLarge):
        build_binary_tree(TimeGrid.uniform(1.0, 7), 3)


def test_tree_forward_levels():
    tree = build_binary_tree(TimeGrid.uniform(1.0, 2), 2)
    X = tree_forward(_model(), tree)
    assert [x.shape for x in X] == [(1, 2), (4, 2), (16, 2)]
    np.testing.assert_allclose(X[1], tree.signs * np.sqrt(0.5))
    # children of node 1 sit at rows 4..7
    np.testing.assert_allclose(X[2][4:8], X[1][1] + tree.signs * np.sqrt(0.5))
