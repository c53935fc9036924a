"""Shared fixtures: laws, deterministic generators, and small sealed trees."""

import numpy as np
import pytest

from branchwalk import make_generator, preset
from branchwalk.tree import MarkedTree


@pytest.fixture(scope="session")
def f1():
    return preset("f1")


@pytest.fixture(scope="session")
def f2():
    return preset("f2")


@pytest.fixture(scope="session")
def f3():
    return preset("f3")


def grow_fixture(law, seed: int, depth: int, cap: int = 1 << 18) -> MarkedTree:
    """Sample a tree, expand everything to ``depth``, and seal it.

    Sealed fixtures are finite, reproducible, walkable (unexpanded boundary
    vertices become reflecting leaves) and safe for exact linear-algebra
    oracles.
    """
    tree = MarkedTree(law, make_generator(seed, 0, "fixture:env"), arena_cap=cap)
    frontier = np.zeros(1, dtype=np.int64)
    for _ in range(depth):
        tree.expand_all(frontier)
        nxt = []
        for x in frontier:
            nxt.extend(tree.child_ids(int(x)))
        if not nxt:
            break
        frontier = np.asarray(nxt, dtype=np.int64)
    tree.seal()
    return tree


def surviving_fixture(law, base_seed: int, depth: int, cap: int = 1 << 18) -> MarkedTree:
    """First seed >= base_seed whose sealed fixture has a non-extinct root."""
    for seed in range(base_seed, base_seed + 200):
        tree = grow_fixture(law, seed, depth, cap)
        if tree.nch[0] > 0:
            return tree
    raise AssertionError("no surviving fixture found in 200 seeds")
