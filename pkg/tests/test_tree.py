"""Marked-tree environment tests.

The oracles here recompute every stored quantity from the raw transition
weights (the only primary data), so the arena bookkeeping and the compensated
accumulators are checked against independent arithmetic.
"""

import math

import numpy as np
import pytest
from hypothesis import given, settings
from hypothesis import strategies as st

from branchwalk import make_generator, preset
from branchwalk.tree import (
    ArenaCapacityError,
    ExtinctEnvironmentError,
    MarkedTree,
    SealedTreeError,
)

from conftest import grow_fixture, surviving_fixture

TOL = 1e-12


def fresh_tree(law, seed=7, cap=1 << 20):
    return MarkedTree(law, make_generator(seed, 0, "test:env"), arena_cap=cap)


def expand_bfs(tree, depth):
    frontier = [0]
    for _ in range(depth):
        nxt = []
        for x in frontier:
            tree.expand(x)
            nxt.extend(int(c) for c in tree.child_ids(x))
        frontier = nxt
    return frontier


# ---------------------------------------------------------------------------
# per-vertex record invariants
# ---------------------------------------------------------------------------


def check_vertex_invariants(tree, x):
    rec = tree.vertex(x)
    assert rec.expanded
    # outgoing weights sum to one
    total = rec.w_parent + math.fsum(rec.child_weights)
    assert total == pytest.approx(1.0, abs=TOL)
    # potential round-trip: each child displacement is recoverable from the
    # stored transition weights alone
    for cid, w in zip(rec.child_ids, rec.child_weights):
        disp = -math.log(w / rec.w_parent)
        assert tree.V[cid] - rec.V == pytest.approx(disp, abs=TOL)
    # both closed forms of the symmetrized potential agree
    lhs = math.exp(-rec.U)
    rhs = math.exp(-rec.V) * (1.0 + rec.Lambda)
    assert lhs == pytest.approx(rhs, rel=TOL)
    # Lambda is the sum of child displacement factors
    lam = math.fsum(math.exp(-(tree.V[c] - rec.V)) for c in rec.child_ids)
    assert rec.Lambda == pytest.approx(lam, rel=TOL, abs=TOL)
    # transition weights have the stated conductance form
    denom = 1.0 + rec.Lambda
    assert rec.w_parent == pytest.approx(1.0 / denom, rel=TOL)
    for cid, w in zip(rec.child_ids, rec.child_weights):
        expected = math.exp(-(tree.V[cid] - rec.V)) / denom
        assert w == pytest.approx(expected, rel=TOL)


@pytest.mark.parametrize("name", ["f1", "f2", "f3"])
def test_expanded_vertex_invariants(name):
    law = preset(name)
    for seed in range(11, 60):  # skip seeds whose tree dies out early
        tree = fresh_tree(law, seed=seed)
        expand_bfs(tree, 6)
        ids = [x for x in range(tree.size) if tree.is_expanded(x)]
        if len(ids) > 10:
            break
    assert len(ids) > 10
    for x in ids:
        check_vertex_invariants(tree, x)


def test_cumulative_exp_potential_matches_path_sum(f1):
    tree = fresh_tree(f1, seed=3)
    expand_bfs(tree, 14)
    deepest = int(np.argmax(tree.depth[: tree.size]))
    assert tree.depth[deepest] >= 10
    path = tree.path_ids(deepest)
    assert path[0] == 0 and path[-1] == deepest
    # cum_expV(x) = sum of e^{V(z)} over the path after the root
    direct = math.fsum(math.exp(tree.V[z]) for z in path[1:])
    assert tree.cumV[deepest] == pytest.approx(direct, rel=1e-13)
    # and the self-normalized ratio is the same sum discounted to x
    assert tree.ratio[deepest] == pytest.approx(
        direct * math.exp(-tree.V[deepest]), rel=1e-10)


def test_path_ratio_recursion(f2):
    tree = fresh_tree(f2, seed=5)
    expand_bfs(tree, 12)
    rng = np.random.default_rng(0)
    ids = rng.choice(tree.size, size=min(200, tree.size), replace=False)
    for x in ids:
        x = int(x)
        path = tree.path_ids(x)
        # sum over strict-ancestry-to-self of e^{V(z) - V(x)}, root excluded
        direct = math.fsum(math.exp(tree.V[z] - tree.V[x]) for z in path[1:])
        assert tree.ratio[x] == pytest.approx(direct, rel=1e-10, abs=1e-12)


# ---------------------------------------------------------------------------
# arena mechanics
# ---------------------------------------------------------------------------


def test_expansion_is_idempotent(f1):
    tree = fresh_tree(f1)
    tree.expand(0)
    size = tree.size
    kids = tree.child_ids(0).copy()
    state = tree.rng.bit_generator.state
    tree.expand(0)
    assert tree.size == size
    assert np.array_equal(tree.child_ids(0), kids)
    assert tree.rng.bit_generator.state == state


def test_reproducible_arena(f3):
    a = fresh_tree(f3, seed=42)
    b = fresh_tree(f3, seed=42)
    expand_bfs(a, 8)
    expand_bfs(b, 8)
    assert a.size == b.size
    for fld in ("parent", "depth", "V", "wpar", "lam", "U", "wchild",
                "cumV", "ratio", "cstart", "nch"):
        av = getattr(a, fld)[: a.size]
        bv = getattr(b, fld)[: b.size]
        assert np.array_equal(av, bv, equal_nan=True), fld


def test_arena_growth_schedule_does_not_change_draws(f1):
    # a tree that reallocates while growing and one that never does must see
    # the exact same draw stream: growth is invisible to the environment
    small = MarkedTree(f1, make_generator(9, 0, "test:env"),
                       arena_cap=1 << 20, initial_capacity=1 << 13)
    big = MarkedTree(f1, make_generator(9, 0, "test:env"),
                     arena_cap=1 << 20, initial_capacity=1 << 20)
    expand_bfs(small, 12)  # 2^13 - 1 vertices forces reallocation on `small`
    expand_bfs(big, 12)
    assert small.alloc_epoch > 0
    assert big.alloc_epoch == 0
    assert small.size == big.size
    for fld in ("parent", "depth", "V", "cumV", "ratio", "cstart", "nch"):
        a = getattr(small, fld)[: small.size]
        b = getattr(big, fld)[: big.size]
        assert np.array_equal(a, b, equal_nan=True), fld


def test_arena_cap_raises(f1):
    tree = MarkedTree(f1, make_generator(1, 0, "test:env"), arena_cap=1 << 12)
    with pytest.raises(ArenaCapacityError):
        expand_bfs(tree, 40)


def test_lawless_tree_rejects_expansion():
    tree = MarkedTree(None, None)
    with pytest.raises(SealedTreeError):
        tree.expand(0)


def test_sealed_fixture_is_fully_expanded(f1):
    # sealing converts the sampled prefix into a closed, walkable tree
    tree = grow_fixture(f1, 2, 3)
    assert all(tree.is_expanded(x) for x in range(tree.size))


def test_sealed_boundary_reflects(f1):
    tree = grow_fixture(f1, 2, 3)
    boundary = [x for x in range(tree.size) if tree.nch[x] == 0]
    assert boundary, "depth-3 fixture should have leaves"
    for x in boundary:
        rec = tree.vertex(x)
        assert rec.w_parent == 1.0
        assert rec.Lambda == 0.0
        assert rec.child_ids == ()
        assert rec.U == rec.V


# ---------------------------------------------------------------------------
# snapshots
# ---------------------------------------------------------------------------


def test_snapshot_round_trip(tmp_path, f2):
    tree = grow_fixture(f2, 4, 6)
    path = tmp_path / "tree.snap"
    tree.snapshot(path)
    back = MarkedTree.load_snapshot(path)
    assert back.size == tree.size
    for fld in ("parent", "depth", "nch"):
        assert np.array_equal(getattr(back, fld)[: back.size],
                              getattr(tree, fld)[: tree.size]), fld
    # cstart carries information only where children exist
    has_kids = tree.nch[: tree.size] > 0
    assert np.array_equal(back.cstart[: back.size][has_kids],
                          tree.cstart[: tree.size][has_kids])
    for fld in ("V", "U", "lam", "wpar", "wchild", "cumV", "ratio"):
        a = getattr(tree, fld)[: tree.size]
        b = getattr(back, fld)[: back.size]
        assert np.allclose(a, b, rtol=0, atol=1e-12, equal_nan=True), fld


def test_snapshot_rejects_tampered_file(tmp_path, f2):
    tree = grow_fixture(f2, 4, 4)
    path = tmp_path / "tree.snap"
    tree.snapshot(path)
    lines = path.read_text().splitlines()
    data = [i for i, ln in enumerate(lines) if ln and not ln.startswith("#")]
    i, j = data[0], data[1]  # reorder the first two vertex rows
    lines[i], lines[j] = lines[j], lines[i]
    path.write_text("\n".join(lines) + "\n")
    with pytest.raises(ValueError):
        MarkedTree.load_snapshot(path)


# ---------------------------------------------------------------------------
# hand-built fixtures
# ---------------------------------------------------------------------------


def test_from_displacements_two_children():
    # root with displacements -0.3 and 0.9; all closed forms by hand
    spec = [(-0.3, []), (0.9, [])]
    tree = MarkedTree.from_displacements(spec)
    lam = math.exp(0.3) + math.exp(-0.9)
    assert tree.lam[0] == pytest.approx(lam, rel=TOL)
    assert tree.wpar[1] == pytest.approx(1.0, abs=0)  # sealed leaf reflects
    rec = tree.vertex(0)
    assert rec.w_parent == pytest.approx(1.0 / (1.0 + lam), rel=TOL)
    assert rec.child_weights[0] == pytest.approx(math.exp(0.3) / (1.0 + lam), rel=TOL)
    assert rec.child_weights[1] == pytest.approx(math.exp(-0.9) / (1.0 + lam), rel=TOL)
    assert tree.V[1] == pytest.approx(-0.3, abs=TOL)
    assert tree.V[2] == pytest.approx(0.9, abs=TOL)
    assert rec.U == pytest.approx(-math.log(math.exp(-0.0) * (1.0 + lam)), rel=TOL)


def test_from_displacements_nested_path():
    spec = [(0.5, [(-1.0, [])])]
    tree = MarkedTree.from_displacements(spec)
    assert tree.size == 3
    assert tree.depth[2] == 2
    assert tree.V[2] == pytest.approx(-0.5, abs=TOL)
    assert tree.cumV[2] == pytest.approx(math.exp(0.5) + math.exp(-0.5), rel=TOL)
    # ratio recursion: R(c) = 1 + e^{-A} R(p), R(root) = 0
    r1 = 1.0
    r2 = 1.0 + math.exp(1.0) * r1
    assert tree.ratio[1] == pytest.approx(r1, rel=TOL)
    assert tree.ratio[2] == pytest.approx(r2, rel=TOL)


# ---------------------------------------------------------------------------
# generations, additive statistics, survival
# ---------------------------------------------------------------------------


def test_generation_enumeration(f3):
    tree = fresh_tree(f3, seed=8)
    expand_bfs(tree, 7)
    for n in range(8):
        ids = tree.generation(n)
        brute = np.flatnonzero(tree.depth[: tree.size] == n)
        assert np.array_equal(np.sort(ids), brute)


def test_derivative_martingale_matches_direct_sum(f2):
    tree = fresh_tree(f2, seed=21)
    expand_bfs(tree, 6)
    for n in (0, 1, 3, 6):
        ids = tree.generation(n)
        direct = math.fsum(tree.V[x] * math.exp(-tree.V[x]) for x in ids)
        assert tree.derivative_martingale(n) == pytest.approx(direct, abs=1e-12)
    assert tree.derivative_martingale(0) == 0.0  # V(root) = 0


def test_derivative_martingale_extinct_generation():
    tree = MarkedTree.from_displacements([(0.2, [])])
    assert tree.derivative_martingale(5) == 0.0


def test_survives_to_matches_exhaustive_expansion(f2):
    hits = 0
    for seed in range(40):
        probe = fresh_tree(f2, seed=seed)
        alive = probe.survives_to(9)
        ref = fresh_tree(f2, seed=seed)
        expand_bfs(ref, 9)
        brute = bool(np.any(ref.depth[: ref.size] == 9))
        assert alive == brute
        hits += alive
    # f2 has extinction probability 1/2; both outcomes must occur
    assert 0 < hits < 40


def test_survival_fraction_tracks_extinction_probability(f2):
    # depth-25 survival is within a few percent of asymptotic survival
    n = 400
    alive = sum(
        fresh_tree(f2, seed=s, cap=1 << 22).survives_to(25) for s in range(n)
    )
    q = f2.extinction_probability()
    assert q == pytest.approx(0.5, abs=1e-9)
    se = math.sqrt((1 - q) * q / n)
    assert abs(alive / n - (1 - q)) < 5 * se + 0.02


def test_degenerate_single_path_law():
    law = preset("degenerate")
    tree = fresh_tree(law, seed=0)
    assert tree.survives_to(50)  # expands the ray down to depth 50
    assert tree.size == 51
    assert np.allclose(tree.V[: tree.size], 0.0)
    assert np.all(tree.nch[: tree.size - 1] == 1)


def test_extinct_root_has_no_children():
    # hunt for an f2 seed whose root draws zero offspring
    law = preset("f2")
    for seed in range(100):
        tree = fresh_tree(law, seed=seed)
        tree.expand(0)
        if tree.nch[0] == 0:
            assert tree.generation(1).size == 0
            assert not tree.survives_to(1)
            return
    raise AssertionError("no immediately-extinct f2 root in 100 seeds")


# ---------------------------------------------------------------------------
# property test over randomized laws
# ---------------------------------------------------------------------------


@settings(max_examples=25, deadline=None)
@given(
    seed=st.integers(min_value=0, max_value=2**31),
    mean=st.floats(min_value=1.3, max_value=2.6),
    q=st.floats(min_value=0.05, max_value=0.45),
)
def test_random_geometric_laws_build_consistent_trees(seed, mean, q):
    if q * mean >= 0.999:  # stay safely inside the calibrable region
        return
    from branchwalk import calibrate_law

    law = calibrate_law("f2", mean=mean, q=q)
    tree = MarkedTree(law, make_generator(seed, 0, "prop:env"), arena_cap=1 << 18)
    expand_bfs(tree, 4)
    for x in range(tree.size):
        if tree.is_expanded(x):
            check_vertex_invariants(tree, x)
