"""
=============================================================================
EXACT RADEMACHER TREE
=============================================================================
Product tree of N independent +-sqrt(dt_k) walks. Nodes at depth k are
numbered 0 .. 2^(N k) - 1; the children of node p are p * 2^N + c, where
bit i of c is set iff particle i moves up. Every child has probability 2^-N.
=============================================================================
"""

from dataclasses import dataclass

import numpy as np

from config.config import ORACLE_CONFIG
from models.errors import TreeTooLarge
from stochastics.brownian import euler_step


@dataclass(frozen=True)
class BinaryTree:
    grid: object
    N: int

    @property
    def M(self):
        return self.grid.M

    @property
    def branching(self):
        return 2 ** self.N

    @property
    def signs(self):
        """(2^N, N) array of +-1: row c is the move of every particle."""
        c = np.arange(self.branching)[:, None]
        bits = (c >> np.arange(self.N)[None, :]) & 1
        return np.where(bits == 1, 1.0, -1.0)

    @property
    def child_probs(self):
        return np.full(self.branching, 1.0 / self.branching)

    def n_nodes(self, k):
        return self.branching ** k

    def node_probs(self, k):
        return np.full(self.n_nodes(k), 1.0 / self.n_nodes(k))

    def increments(self, k):
        """(2^N, N) increments of step k for each child code."""
        return self.signs * np.sqrt(self.grid.dt[k])

    def child_increments(self, k):
        """(n_{k+1}, N) increments leading into every node of depth k+1."""
        return np.tile(self.increments(k), (self.n_nodes(k), 1))


def build_binary_tree(grid, N):
    if N < 1:
        raise ValueError(f"N must be >= 1, got {N}")
    if N * grid.M > ORACLE_CONFIG["tree_max_bits"]:
        raise TreeTooLarge(
            f"N*M = {N * grid.M} exceeds {ORACLE_CONFIG['tree_max_bits']} tree bits")
    return BinaryTree(grid, N)


def tree_forward(model, tree):
    """Forward states per depth: list of (n_k, N) arrays."""
    X = [np.full((1, tree.N), float(model.x0_init))]
    for k, dt in enumerate(tree.grid.dt):
        parent = np.repeat(X[-1], tree.branching, axis=0)
        X.append(euler_step(model, parent, dt, tree.child_increments(k)))
    return X
