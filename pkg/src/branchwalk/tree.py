"""Lazily expanded arenas of marked tree vertices.

A tree lives in parallel numpy arrays indexed by dense vertex ids (root = 0).
Each vertex carries the potential V, the symmetrized potential U, the child
mass Lambda, the transition weights, and two running path quantities:

* ``cum_expV``: compensated sum of e^{V(z)} over the path ]root, x]
* ``ratio``:    sum of e^{V(z) - V(x)} over the same path (self-normalized,
  so it stays well scaled on deep paths; drives hitting formulas and the
  reflecting-barrier predicate)

Vertices are expanded on demand: sampling a vertex's offspring count and
child displacements fixes its outgoing weights. The ghost parent of the root
is not a vertex; the root stores its outgoing weight toward it.
"""

from __future__ import annotations

import math
from dataclasses import dataclass

import numpy as np

from . import _kernels
from .families import DisplacementLaw


def _exp_inf(v: float) -> float:
    """exp that saturates to inf instead of raising, like the array kernels."""
    try:
        return math.exp(v)
    except OverflowError:
        return math.inf


class ArenaCapacityError(RuntimeError):
    """An operation would push the arena past its hard cap.

    ``partial`` carries whatever partial result the failed operation had
    accumulated, when the operation supports it.
    """

    def __init__(self, message: str, partial=None):
        super().__init__(message)
        self.partial = partial


class ExtinctEnvironmentError(RuntimeError):
    """The root generation is empty; walks cannot start."""


class SealedTreeError(RuntimeError):
    """Expansion was requested on a sealed (static) tree."""


@dataclass(frozen=True)
class VertexRecord:
    """Read-only view of one arena vertex."""

    id: int
    parent_id: int
    depth: int
    V: float
    U: float
    Lambda: float
    w_parent: float
    child_ids: tuple[int, ...]
    child_weights: tuple[float, ...]
    expanded: bool
    cum_expV: float


_SNAPSHOT_SCHEMA = "branchwalk.snapshot.v1"


class MarkedTree:
    """Arena-backed marked Galton-Watson tree.

    ``law`` and ``rng`` drive lazy expansion; a tree built without them (or
    after :meth:`seal`) is static: every vertex is already expanded, and
    vertices that were unexpanded at sealing time become reflecting leaves.
    """

    def __init__(self, law: DisplacementLaw | None, rng: np.random.Generator | None,
                 arena_cap: int = 1 << 26, initial_capacity: int = 1 << 14):
        if law is not None and rng is None:
            raise ValueError("a law-backed tree needs a generator")
        if initial_capacity < _kernels.KID_HEADROOM + 1:
            initial_capacity = _kernels.KID_HEADROOM + 1
        if arena_cap < initial_capacity:
            arena_cap = initial_capacity
        self.law = law
        self.rng = rng
        self.arena_cap = int(arena_cap)
        self.alloc_epoch = 0  # bumped on every reallocation; walks resync on it
        self._allocate(int(initial_capacity))
        self.size = 1
        self._init_root()

    # -- storage -----------------------------------------------------------

    def _allocate(self, n: int) -> None:
        self.parent = np.empty(n, dtype=np.int64)
        self.depth = np.empty(n, dtype=np.int32)
        self.V = np.empty(n, dtype=np.float64)
        self.wpar = np.empty(n, dtype=np.float64)
        self.lam = np.empty(n, dtype=np.float64)
        self.U = np.empty(n, dtype=np.float64)
        self.wchild = np.empty(n, dtype=np.float64)
        self.cumV = np.empty(n, dtype=np.float64)
        self.cumC = np.empty(n, dtype=np.float64)
        self.ratio = np.empty(n, dtype=np.float64)
        self.cstart = np.empty(n, dtype=np.int64)
        self.nch = np.empty(n, dtype=np.int32)

    def _init_root(self) -> None:
        self.parent[0] = -1
        self.depth[0] = 0
        self.V[0] = 0.0
        self.wpar[0] = np.nan
        self.lam[0] = np.nan
        self.U[0] = np.nan
        self.wchild[0] = 1.0  # the ghost moves to the root with probability 1
        self.cumV[0] = 0.0
        self.cumC[0] = 0.0
        self.ratio[0] = 0.0
        self.cstart[0] = -1
        self.nch[0] = 0

    @property
    def capacity(self) -> int:
        return self.parent.shape[0]

    def _grow(self) -> bool:
        """Double the arena up to the cap. False when already at the cap."""
        cur = self.capacity
        if cur >= self.arena_cap:
            return False
        new = min(cur * 2, self.arena_cap)
        arrays = ("parent", "depth", "V", "wpar", "lam", "U", "wchild",
                  "cumV", "cumC", "ratio", "cstart", "nch")
        for name in arrays:
            old = getattr(self, name)
            fresh = np.empty(new, dtype=old.dtype)
            fresh[:cur] = old
            setattr(self, name, fresh)
        self.alloc_epoch += 1
        return True

    def _arena_args(self) -> tuple:
        return (self.parent, self.depth, self.V, self.wpar, self.lam, self.U,
                self.wchild, self.cumV, self.cumC, self.ratio, self.cstart, self.nch)

    # -- expansion ----------------------------------------------------------

    def is_expanded(self, x: int) -> bool:
        return self.cstart[x] >= 0

    def child_ids(self, x: int) -> np.ndarray:
        if self.cstart[x] < 0:
            return np.empty(0, dtype=np.int64)
        c0 = self.cstart[x]
        return np.arange(c0, c0 + self.nch[x], dtype=np.int64)

    def expand(self, x: int) -> np.ndarray:
        """Sample x's children (idempotent). Returns the child id array."""
        x = int(x)
        if not 0 <= x < self.size:
            raise IndexError(f"vertex {x} not in arena of size {self.size}")
        if self.cstart[x] >= 0:
            return self.child_ids(x)
        if self.law is None:
            raise SealedTreeError("sealed tree cannot expand; rebuild with a law to grow it")
        while self.size + _kernels.KID_HEADROOM > self.capacity:
            if not self._grow():
                raise ArenaCapacityError(
                    f"arena cap {self.arena_cap} reached while expanding vertex {x}")
        off_kind, off_param, vals, cdf = self.law.kernel_args
        newsize = _kernels.expand_vertex(
            self.rng, off_kind, off_param, vals, cdf, *self._arena_args(), x, self.size)
        if newsize < 0:
            raise ArenaCapacityError(
                f"offspring draw at vertex {x} exceeded the expansion headroom "
                f"({_kernels.KID_HEADROOM})")
        self.size = int(newsize)
        return self.child_ids(x)

    def expand_all(self, ids: np.ndarray) -> None:
        """Expand every id in the array (bulk kernel; skips expanded ones)."""
        ids = np.ascontiguousarray(ids, dtype=np.int64)
        if ids.size == 0:
            return
        if ids.min() < 0 or ids.max() >= self.size:
            raise IndexError("vertex id out of range")
        if self.law is None:
            if np.any(self.cstart[ids] < 0):
                raise SealedTreeError("sealed tree cannot expand")
            return
        off_kind, off_param, vals, cdf = self.law.kernel_args
        at = 0
        while at < ids.size:
            newsize, at = _kernels.expand_many(
                self.rng, off_kind, off_param, vals, cdf, *self._arena_args(),
                ids, at, self.size)
            if newsize < 0:
                raise ArenaCapacityError("offspring draw exceeded expansion headroom")
            self.size = int(newsize)
            if at < ids.size and not self._grow():
                raise ArenaCapacityError(
                    f"arena cap {self.arena_cap} reached during bulk expansion")

    def seal(self) -> None:
        """Freeze the tree: unexpanded vertices become reflecting leaves.

        A reflecting leaf keeps its V but moves to its parent with
        probability 1; its U/Lambda are set as if it had no children. Used to
        turn a sampled prefix into a static fixture.
        """
        pend = np.flatnonzero(self.cstart[:self.size] < 0)
        self.wpar[pend] = 1.0
        self.lam[pend] = 0.0
        self.U[pend] = self.V[pend]
        self.cstart[pend] = self.size
        self.nch[pend] = 0
        self.law = None
        self.rng = None

    # -- views ----------------------------------------------------------------

    def vertex(self, x: int) -> VertexRecord:
        x = int(x)
        if not 0 <= x < self.size:
            raise IndexError(f"vertex {x} not in arena of size {self.size}")
        kids = self.child_ids(x)
        return VertexRecord(
            id=x,
            parent_id=int(self.parent[x]),
            depth=int(self.depth[x]),
            V=float(self.V[x]),
            U=float(self.U[x]),
            Lambda=float(self.lam[x]),
            w_parent=float(self.wpar[x]),
            child_ids=tuple(int(c) for c in kids),
            child_weights=tuple(float(self.wchild[c]) for c in kids),
            expanded=bool(self.cstart[x] >= 0),
            cum_expV=float(self.cumV[x]),
        )

    def path_ids(self, x: int) -> list[int]:
        """Vertex ids from the root down to x, inclusive."""
        out = []
        v = int(x)
        while v >= 0:
            out.append(v)
            v = int(self.parent[v])
        out.reverse()
        return out

    def generation(self, n: int, expand: bool = True) -> np.ndarray:
        """Ids of generation n, expanding generations < n when allowed."""
        gen = np.zeros(1, dtype=np.int64)
        for _ in range(n):
            if expand and self.law is not None:
                self.expand_all(gen)
            starts = self.cstart[gen]
            counts = self.nch[gen].astype(np.int64)
            if np.any(starts < 0):
                raise SealedTreeError("generation request hit an unexpanded vertex")
            total = int(counts.sum())
            if total == 0:
                return np.empty(0, dtype=np.int64)
            reps = np.repeat(np.arange(gen.size), counts)
            within = np.arange(total, dtype=np.int64) - np.repeat(
                np.cumsum(counts) - counts, counts)
            gen = starts[reps] + within
        return gen

    # -- martingale / survival ---------------------------------------------

    def derivative_martingale(self, n: int) -> float:
        """D_n = sum over generation n of V(x) e^{-V(x)}; 0 when extinct."""
        if n < 0:
            raise ValueError("generation index must be >= 0")
        gen = self.generation(n)
        if gen.size == 0:
            return 0.0
        v = self.V[gen]
        return math.fsum((v * np.exp(-v)).tolist())

    def survives_to(self, depth: int) -> bool:
        """True iff generation ``depth`` is non-empty (early-exit DFS)."""
        if depth < 0:
            raise ValueError("depth must be >= 0")
        if depth == 0:
            return True
        stack = [0]
        while stack:
            x = stack.pop()
            if self.depth[x] >= depth:
                return True
            kids = self.expand(x) if self.law is not None else self.child_ids(x)
            stack.extend(int(c) for c in kids)
        return False

    # -- snapshots ------------------------------------------------------------

    def snapshot(self, path) -> None:
        """Line-oriented dump: id, parent, depth, V, U, Lambda, w_parent."""
        fam = self.law.family if self.law is not None else "static"
        with open(path, "w", encoding="utf-8") as fh:
            fh.write(f"# {_SNAPSHOT_SCHEMA} family={fam} size={self.size}\n")
            fh.write("# id parent depth V U Lambda w_parent\n")
            for x in range(self.size):
                fh.write(
                    f"{x} {self.parent[x]} {self.depth[x]} "
                    f"{self.V[x]:.17g} {self.U[x]:.17g} {self.lam[x]:.17g} "
                    f"{self.wpar[x]:.17g}\n")

    @classmethod
    def load_snapshot(cls, path) -> "MarkedTree":
        """Rebuild a sealed tree from :meth:`snapshot` output.

        Vertices that were unexpanded in the source become reflecting leaves.
        Derived arrays (child weights, path sums) are recomputed from V and
        the parent pointers; ids must be dense with parents before children.
        """
        rows = []
        with open(path, "r", encoding="utf-8") as fh:
            header = fh.readline()
            if _SNAPSHOT_SCHEMA not in header:
                raise ValueError(f"not a {_SNAPSHOT_SCHEMA} file: {path}")
            for line in fh:
                if line.startswith("#") or not line.strip():
                    continue
                parts = line.split()
                rows.append((int(parts[0]), int(parts[1]), int(parts[2]),
                             float(parts[3]), float(parts[4]), float(parts[5]),
                             float(parts[6])))
        n = len(rows)
        if n == 0 or rows[0][0] != 0 or rows[0][1] != -1:
            raise ValueError("snapshot must start at a root vertex with id 0")
        tree = cls(None, None, arena_cap=max(n, _kernels.KID_HEADROOM + 1),
                   initial_capacity=max(n, _kernels.KID_HEADROOM + 1))
        tree.size = n
        for x, par, dep, v, u, lm, wp in rows:
            if x != rows[x][0]:
                raise ValueError("snapshot ids must be dense and ordered")
            if x > 0 and not 0 <= par < x:
                raise ValueError(f"vertex {x} lists parent {par} after itself")
            tree.parent[x] = par
            tree.depth[x] = dep
            tree.V[x] = v
            tree.U[x] = u
            tree.lam[x] = lm
            tree.wpar[x] = wp
        # children of any vertex are a contiguous id block in arena order
        tree.cstart[:n] = n
        tree.nch[:n] = 0
        for x in range(n - 1, 0, -1):
            par = tree.parent[x]
            tree.cstart[par] = x
            tree.nch[par] += 1
        # unexpanded source vertices (nan U) become reflecting leaves
        for x in range(n):
            if math.isnan(tree.U[x]):
                if tree.nch[x] > 0:
                    raise ValueError(f"vertex {x} has children but no stored weights")
                tree.wpar[x] = 1.0
                tree.lam[x] = 0.0
                tree.U[x] = tree.V[x]
            if tree.nch[x] == 0:
                tree.cstart[x] = n
        for x in np.flatnonzero(tree.nch[:n] > 0):
            c0, k = tree.cstart[x], tree.nch[x]
            if not np.all(tree.parent[c0:c0 + k] == x):
                raise ValueError("children of a vertex must form a contiguous id block")
        tree.cumV[0] = 0.0
        tree.cumC[0] = 0.0
        tree.ratio[0] = 0.0
        tree.wchild[0] = 1.0
        # path sums saturate to inf/nan past double range; consumers fall
        # back to log-domain arithmetic, so silence the overflow chatter
        with np.errstate(over="ignore", invalid="ignore"):
            for x in range(1, n):
                par = tree.parent[x]
                y = _exp_inf(tree.V[x]) - tree.cumC[par]
                t = tree.cumV[par] + y
                tree.cumC[x] = (t - tree.cumV[par]) - y
                tree.cumV[x] = t
                a = tree.V[x] - tree.V[par]
                tree.ratio[x] = 1.0 + math.exp(-a) * tree.ratio[par]
                tree.wchild[x] = math.exp(-a) * tree.wpar[par]
        return tree

    @classmethod
    def from_displacements(cls, spec) -> "MarkedTree":
        """Hand-built static fixture.

        ``spec`` is the root's child list; every child is a pair
        ``(displacement, child_list)`` and a leaf is ``(displacement, [])``.
        Weights, U, Lambda, and path sums are computed exactly as expansion
        would. Vertices with empty child lists are leaves (the walk reflects).
        """
        # breadth-first so children occupy contiguous id blocks
        cap = 1 << 10

        def count(nodes):
            return sum(1 + count(sub) for _, sub in nodes)

        total = 1 + count(spec)
        while cap < total + 1:
            cap *= 2
        tree = cls(None, None, arena_cap=cap, initial_capacity=cap)
        queue = [(0, spec)]
        with np.errstate(over="ignore", invalid="ignore"):
            while queue:
                x, kids = queue.pop(0)
                base = tree.size
                s = 0.0
                for i, (disp, sub) in enumerate(kids):
                    c = base + i
                    tree.parent[c] = x
                    tree.depth[c] = tree.depth[x] + 1
                    tree.V[c] = float(tree.V[x] + disp)
                    w = _exp_inf(-disp)
                    s += w
                    tree.wchild[c] = w
                    y = _exp_inf(tree.V[c]) - tree.cumC[x]
                    t = tree.cumV[x] + y
                    tree.cumC[c] = (t - tree.cumV[x]) - y
                    tree.cumV[c] = t
                    tree.ratio[c] = 1.0 + w * tree.ratio[x]
                    queue.append((c, sub))
                inv = 1.0 / (1.0 + s)
                for i in range(len(kids)):
                    tree.wchild[base + i] *= inv
                tree.wpar[x] = inv
                tree.lam[x] = s
                tree.U[x] = tree.V[x] - math.log1p(s)
                tree.cstart[x] = base if kids else total
                tree.nch[x] = len(kids)
                tree.size = base + len(kids)
        tree.size = total
        return tree
