"""The quenched biased walk: stepping, local times, favorites, barrier events.

The walk lives on a :class:`~branchwalk.tree.MarkedTree` and expands the
environment on demand. Local times count visits at steps 1..n; the starting
occupation of the root and all ghost visits stay out of the table (ghost
visits are tallied separately). Favorite-set maintenance is O(1) per step in
the Python stepper because a count can only tie or beat the maximum by
exactly one; the bulk kernel recovers the same set by rescanning the visited
list, which the audit helper also uses.
"""

from __future__ import annotations

import math
from collections.abc import Mapping
from dataclasses import dataclass

import numpy as np


def _grow_buf(arr: np.ndarray) -> np.ndarray:
    fresh = np.empty(arr.size * 2, dtype=arr.dtype)
    fresh[: arr.size] = arr
    return fresh

from . import _kernels
from ._kernels import (
    CAP, NEED_ARENA, NEED_RETURNS, NEED_VISITED, OK, STATE_LEN,
    S_BARRIER_HIT, S_BARRIER_STEP, S_GHOST, S_MAXCOUNT, S_MAXDEPTH,
    S_NRETURNS, S_NVISITED, S_POS, S_SIZE, S_STEPS,
)
from .tree import ArenaCapacityError, ExtinctEnvironmentError, MarkedTree

#: position marker for the ghost parent of the root
GHOST = -1


@dataclass(frozen=True)
class BarrierConfig:
    """Reflecting-barrier threshold n/(log n)^gamma at horizon n."""

    gamma: float
    horizon: int

    def __post_init__(self) -> None:
        if self.horizon < 2:
            raise ValueError("horizon must be >= 2 so the threshold is positive")

    @property
    def threshold(self) -> float:
        return self.horizon / math.log(self.horizon) ** self.gamma


def barrier_crossed(tree: MarkedTree, x: int, cfg: BarrierConfig) -> bool:
    """True iff the path ratio sum_{]root,x]} e^{V(z)-V(x)} exceeds the threshold.

    The stored self-normalized ``ratio`` equals cum_expV(x)/e^{V(x)} exactly,
    so no big exponentials are formed. The root's empty sum never crosses.
    """
    return bool(tree.ratio[x] > cfg.threshold)


def below_barrier(tree: MarkedTree, x: int, cfg: BarrierConfig) -> bool:
    """True iff no vertex strictly between the root and x crosses."""
    v = int(tree.parent[x]) if x != 0 else -1
    while v > 0:  # the root's empty path sum cannot cross; stop before it
        if barrier_crossed(tree, v, cfg):
            return False
        v = int(tree.parent[v])
    return True


def in_first_crossing_set(tree: MarkedTree, x: int, cfg: BarrierConfig) -> bool:
    """True iff x crosses and no proper ancestor between root and x does."""
    return barrier_crossed(tree, x, cfg) and below_barrier(tree, x, cfg)


class LocalTimeView(Mapping):
    """Associative view (vertex id -> positive visit count) over walk arrays."""

    def __init__(self, ids: np.ndarray, counts: np.ndarray):
        order = np.argsort(ids)
        self._ids = ids[order]
        self._counts = counts[order]

    def __getitem__(self, key: int) -> int:
        i = np.searchsorted(self._ids, key)
        if i < self._ids.size and self._ids[i] == key:
            return int(self._counts[i])
        raise KeyError(key)

    def __iter__(self):
        return iter(int(x) for x in self._ids)

    def __len__(self) -> int:
        return int(self._ids.size)


@dataclass(frozen=True)
class WalkState:
    """Snapshot of a walk, detached from the live buffers."""

    position: int
    steps: int
    local_time: LocalTimeView
    max_count: int
    favorites: frozenset[int]
    root_returns: np.ndarray
    max_depth: int
    rng_state: dict
    ghost_visits: int
    barrier_hit: bool
    first_barrier_step: int


class Walk:
    """Single-owner walker over one tree.

    ``barrier`` switches on first-crossing bookkeeping against the config's
    threshold. All stochastic moves draw from ``rng``; environment expansion
    draws from the tree's own generator.
    """

    def __init__(self, tree: MarkedTree, rng: np.random.Generator,
                 barrier: BarrierConfig | None = None):
        root_kids = tree.expand(0) if tree.law is not None else tree.child_ids(0)
        if root_kids.size == 0:
            raise ExtinctEnvironmentError("root has no children; nothing to walk on")
        self.tree = tree
        self.rng = rng
        self.barrier = barrier
        self._thresh = barrier.threshold if barrier is not None else -1.0
        self.state = np.zeros(STATE_LEN, dtype=np.int64)
        self.state[S_POS] = 0
        self.state[S_SIZE] = tree.size
        self.state[S_BARRIER_STEP] = -1
        self._epoch = tree.alloc_epoch
        self.L = np.zeros(tree.capacity, dtype=np.int64)
        self.AC = np.zeros(tree.capacity, dtype=np.uint8)
        self.visited = np.empty(1 << 12, dtype=np.int64)
        self.returns = np.empty(1 << 12, dtype=np.int64)
        self.favorites: set[int] = set()

    # -- bookkeeping -------------------------------------------------------

    def _sync_arrays(self) -> None:
        """Track arena reallocation: walk arrays stay parallel to the arena."""
        if self._epoch != self.tree.alloc_epoch:
            cap = self.tree.capacity
            grown = np.zeros(cap, dtype=np.int64)
            grown[: self.L.size] = self.L
            self.L = grown
            grownc = np.zeros(cap, dtype=np.uint8)
            grownc[: self.AC.size] = self.AC
            self.AC = grownc
            self._epoch = self.tree.alloc_epoch
        self.state[S_SIZE] = self.tree.size

    @property
    def position(self) -> int:
        return int(self.state[S_POS])

    @property
    def steps(self) -> int:
        return int(self.state[S_STEPS])

    @property
    def max_count(self) -> int:
        return int(self.state[S_MAXCOUNT])

    @property
    def max_depth(self) -> int:
        return int(self.state[S_MAXDEPTH])

    @property
    def ghost_visits(self) -> int:
        return int(self.state[S_GHOST])

    @property
    def barrier_hit(self) -> bool:
        return bool(self.state[S_BARRIER_HIT])

    def visited_ids(self) -> np.ndarray:
        return self.visited[: self.state[S_NVISITED]]

    def root_returns(self) -> np.ndarray:
        return self.returns[: self.state[S_NRETURNS]]

    def local_time(self, x: int) -> int:
        return int(self.L[x])

    def rescan_favorites(self) -> tuple[int, np.ndarray]:
        """(max count, argmax ids) recomputed from scratch over visited ids."""
        ids = self.visited_ids()
        if ids.size == 0:
            return 0, np.empty(0, dtype=np.int64)
        counts = self.L[ids]
        best = int(counts.max())
        return best, np.sort(ids[counts == best])

    def audit_favorites(self) -> bool:
        """Check the live favorite set against a full rescan."""
        best, ids = self.rescan_favorites()
        return best == self.max_count and set(int(i) for i in ids) == self.favorites

    def state_snapshot(self) -> WalkState:
        ids = self.visited_ids().copy()
        return WalkState(
            position=self.position,
            steps=self.steps,
            local_time=LocalTimeView(ids, self.L[ids].copy()),
            max_count=self.max_count,
            favorites=frozenset(self.favorites),
            root_returns=self.root_returns().copy(),
            max_depth=self.max_depth,
            rng_state=self.rng.bit_generator.state,
            ghost_visits=self.ghost_visits,
            barrier_hit=self.barrier_hit,
            first_barrier_step=int(self.state[S_BARRIER_STEP]),
        )

    # -- stepping ------------------------------------------------------------

    def step(self) -> int:
        """One step in pure Python; mirrors the kernel draw-for-draw."""
        tree = self.tree
        pos = self.position
        if pos == GHOST:
            nxt = 0
        else:
            if tree.cstart[pos] < 0:
                tree.expand(pos)
            self._sync_arrays()
            r = self.rng.random()
            if r < tree.wpar[pos] or tree.nch[pos] == 0:
                nxt = int(tree.parent[pos])
            else:
                acc = float(tree.wpar[pos])
                c0 = int(tree.cstart[pos])
                n = int(tree.nch[pos])
                nxt = c0 + n - 1
                for i in range(n):
                    acc += float(tree.wchild[c0 + i])
                    if r < acc:
                        nxt = c0 + i
                        break
            if nxt >= 0 and tree.parent[nxt] == pos:
                crossed = self._thresh > 0.0 and tree.ratio[pos] > self._thresh
                self.AC[nxt] = 1 if (self.AC[pos] or crossed) else 0
        self.state[S_POS] = nxt
        self.state[S_STEPS] += 1
        if nxt == GHOST:
            self.state[S_GHOST] += 1
            return GHOST
        cnt = int(self.L[nxt]) + 1
        self.L[nxt] = cnt
        if cnt == 1:
            if self.state[S_NVISITED] >= self.visited.size:
                self.visited = _grow_buf(self.visited)
            self.visited[self.state[S_NVISITED]] = nxt
            self.state[S_NVISITED] += 1
        # a count ties or beats the max by exactly one, never skips past it
        if cnt == self.max_count:
            self.favorites.add(nxt)
        elif cnt > self.max_count:
            self.state[S_MAXCOUNT] = cnt
            self.favorites = {nxt}
        if tree.depth[nxt] > self.max_depth:
            self.state[S_MAXDEPTH] = int(tree.depth[nxt])
        if nxt == 0:
            if self.state[S_NRETURNS] >= self.returns.size:
                self.returns = _grow_buf(self.returns)
            self.returns[self.state[S_NRETURNS]] = self.steps
            self.state[S_NRETURNS] += 1
        if (self._thresh > 0.0 and self.AC[nxt] == 0
                and tree.ratio[nxt] > self._thresh and not self.barrier_hit):
            self.state[S_BARRIER_HIT] = 1
            self.state[S_BARRIER_STEP] = self.steps
        return nxt

    def _drive(self, stop_steps: int, stop_returns: int) -> None:
        tree = self.tree
        while True:
            self._sync_arrays()
            if tree.law is not None:
                off_kind, off_param, vals, cdf = tree.law.kernel_args
                tree_rng = tree.rng
            else:
                off_kind, off_param = 0, 0.0
                vals = np.zeros(1, dtype=np.float64)
                cdf = np.ones(1, dtype=np.float64)
                tree_rng = self.rng  # sealed tree: expansion branch is unreachable
            status = _kernels.walk_kernel(
                self.rng, tree_rng, off_kind, off_param, vals, cdf,
                *tree._arena_args(),
                self.L, self.AC, self.visited, self.returns, self.state,
                stop_steps, stop_returns, self._thresh)
            tree.size = int(self.state[S_SIZE])
            if status == OK:
                break
            if status == NEED_ARENA:
                if not tree._grow():
                    self._refresh_favorites()
                    raise ArenaCapacityError(
                        f"arena cap {tree.arena_cap} hit at step {self.steps}",
                        partial=self.state_snapshot())
            elif status == NEED_VISITED:
                self.visited = _grow_buf(self.visited)
            elif status == NEED_RETURNS:
                self.returns = _grow_buf(self.returns)
            elif status == CAP:
                self._refresh_favorites()
                raise ArenaCapacityError(
                    "offspring draw exceeded expansion headroom",
                    partial=self.state_snapshot())
        self._refresh_favorites()

    def _refresh_favorites(self) -> None:
        best, ids = self.rescan_favorites()
        assert best == self.max_count
        self.favorites = set(int(i) for i in ids)

    def run(self, n_steps: int) -> WalkState:
        """Advance exactly n_steps steps (compiled path)."""
        if n_steps < 1:
            raise ValueError("n_steps must be >= 1")
        self._drive(stop_steps=self.steps + n_steps, stop_returns=-1)
        return self.state_snapshot()

    def run_until_returns(self, m: int) -> WalkState:
        """Advance until the m-th visit to the root (total over the walk's life)."""
        if m < 1:
            raise ValueError("m must be >= 1")
        self._drive(stop_steps=-1, stop_returns=m)
        return self.state_snapshot()
