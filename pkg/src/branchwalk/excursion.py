"""Excursion local-time laws on marked trees.

For a vertex x, the number of visits to x during one excursion of the walk
from the root back to the root is 0 with probability 1-a and geometric on
{1,2,...} with failure p otherwise. Both parameters are exact functionals of
the potential along the root-to-x path; this module computes them, samples
excursion sums in sublinear expected time, evaluates the exponential tail
bound for those sums, and provides an independent linear-system oracle.
"""

from __future__ import annotations

import math
from dataclasses import dataclass

import numpy as np

from .tree import MarkedTree, _exp_inf

#: dense-solve oracle refuses above this many chain states
ORACLE_STATE_CAP = 1000


@dataclass(frozen=True)
class PathStats:
    """Exact excursion parameters for one vertex.

    ``a`` is the chance an excursion from the root reaches ``target`` before
    returning; ``1-p`` is the chance the walk at ``target`` retreats to the
    root before revisiting it.
    """

    target: int
    sum_expV: float      # sum of e^{V(z)} over the path after the root
    expU: float
    w_root_ghost: float
    a: float
    p: float

    @property
    def mean(self) -> float:
        # a/(1-p) without the cancellation in 1-p: both parameters share the
        # path sum, which drops out of the ratio
        return self.w_root_ghost / self.expU


def _log_sum_expV(tree: MarkedTree, x: int) -> float:
    """log of the path sum of e^{V}; streamed log-sum-exp, overflow-proof."""
    path = tree.path_ids(x)
    return float(np.logaddexp.reduce(tree.V[path[1:]]))


def path_stats(tree: MarkedTree, x: int) -> PathStats:
    """Exact (a, p) for the vertex x != root; expands x if the tree is live."""
    x = int(x)
    if x == 0:
        raise ValueError(
            "excursion law degenerates at the root; count root returns instead")
    if not 0 <= x < tree.size:
        raise IndexError(f"vertex {x} not in arena of size {tree.size}")
    if tree.law is not None and not tree.is_expanded(x):
        tree.expand(x)

    s = float(tree.cumV[x])
    if math.isfinite(s) and s > 0.0:
        log_s = math.log(s)
    else:  # the running sum over- or underflowed doubles; redo in log domain
        log_s = _log_sum_expV(tree, x)
        s = math.exp(log_s) if log_s < 709.0 else math.inf
    w0 = float(tree.wpar[0])
    u = float(tree.U[x])
    a = math.exp(math.log(w0) - log_s)
    one_minus_p = math.exp(u - log_s)
    return PathStats(
        target=x,
        sum_expV=s,
        expU=_exp_inf(u),
        w_root_ghost=w0,
        a=a,
        p=1.0 - one_minus_p,
    )


@dataclass(frozen=True)
class ExcursionLaw:
    """P(xi=0) = 1-a and P(xi >= k) = a p^{k-1} for k >= 1."""

    a: float
    p: float

    def __post_init__(self) -> None:
        if not 0.0 <= self.a < 1.0:
            raise ValueError(f"a={self.a} outside [0, 1)")
        if not 0.0 <= self.p < 1.0:
            raise ValueError(f"p={self.p} outside [0, 1)")

    @classmethod
    def from_path_stats(cls, ps: PathStats) -> "ExcursionLaw":
        return cls(ps.a, ps.p)

    def pmf(self, k: int) -> float:
        if k < 0:
            return 0.0
        if k == 0:
            return 1.0 - self.a
        return self.a * self.p ** (k - 1) * (1.0 - self.p)

    def tail(self, k: int) -> float:
        """P(xi >= k)."""
        if k <= 0:
            return 1.0
        return self.a * self.p ** (k - 1)

    @property
    def mean(self) -> float:
        return self.a / (1.0 - self.p)

    @property
    def variance(self) -> float:
        omp = 1.0 - self.p
        return self.a * (1.0 + self.p) / omp ** 2 - (self.a / omp) ** 2


def sample_xi(law: ExcursionLaw, rng: np.random.Generator, size: int) -> np.ndarray:
    """iid single-excursion visit counts."""
    hit = rng.random(size) < law.a
    out = np.zeros(size, dtype=np.int64)
    k = int(hit.sum())
    if k:
        out[hit] = rng.geometric(1.0 - law.p, k)
    return out


def sample_total_local_time(law: ExcursionLaw, m: int,
                            rng: np.random.Generator) -> int:
    """One draw of xi_1 + ... + xi_m in O(m*a) expected time.

    The number K of nonzero excursions is binomial; given K the sum is K plus
    a negative binomial (total failures across K geometric runs).
    """
    if m < 1:
        raise ValueError("need m >= 1 excursions")
    k = int(rng.binomial(m, law.a))
    if k == 0:
        return 0
    return k + int(rng.negative_binomial(k, 1.0 - law.p))


def sample_total_local_times(law: ExcursionLaw, m: int,
                             rng: np.random.Generator, size: int) -> np.ndarray:
    """Vectorized :func:`sample_total_local_time`."""
    if m < 1:
        raise ValueError("need m >= 1 excursions")
    k = rng.binomial(m, law.a, size)
    out = k.astype(np.int64)
    pos = k > 0
    npos = int(pos.sum())
    if npos:
        out[pos] += rng.negative_binomial(k[pos], 1.0 - law.p, npos)
    return out


def lemma34_bound(a: float, p: float, eps: float, n: int) -> tuple[float, bool]:
    """Exponential bound for P(xi_1 + ... + xi_n >= ceil(eps*n)).

    Returns (bound, precondition_ok); the bound is a guarantee only when the
    precondition 1-p > 8a/eps holds (strictly).
    """
    if not 0.0 <= a < 1.0:
        raise ValueError(f"a={a} outside [0, 1)")
    if not 0.0 <= p < 1.0:
        raise ValueError(f"p={p} outside [0, 1)")
    if not 0.0 < eps < 1.0:
        raise ValueError(f"eps={eps} outside (0, 1)")
    if n < 1:
        raise ValueError("need n >= 1")
    ok = (1.0 - p) > 8.0 * a / eps
    bound = 6.0 * n * a * math.exp(-(1.0 - p) * eps * n / 8.0)
    return bound, ok


# ---------------------------------------------------------------------------
# linear-system oracle
# ---------------------------------------------------------------------------


def _transition_matrix(tree: MarkedTree) -> np.ndarray:
    """Dense one-step matrix over [ghost, v_0, ..., v_{size-1}]."""
    n = tree.size
    P = np.zeros((n + 1, n + 1))
    P[0, 1] = 1.0  # the ghost always steps back to the root
    for x in range(n):
        row = x + 1
        if x == 0:
            P[row, 0] = tree.wpar[0]
        else:
            P[row, tree.parent[x] + 1] = tree.wpar[x]
        c0, k = int(tree.cstart[x]), int(tree.nch[x])
        for c in range(c0, c0 + k):
            P[row, c + 1] = tree.wchild[c]
    return P


def oracle_hitting(tree: MarkedTree, source: int, target: int, taboo: int) -> float:
    """P(walk from source reaches target before taboo), solved exactly.

    Dense first-step-analysis solve over the whole finite tree (plus the
    ghost); refuses trees above ``ORACLE_STATE_CAP`` states.
    """
    n = tree.size
    if n + 1 > ORACLE_STATE_CAP:
        raise ValueError(f"oracle limited to {ORACLE_STATE_CAP} states, tree has {n + 1}")
    for name, v in (("source", source), ("target", target), ("taboo", taboo)):
        if not 0 <= v < n:
            raise ValueError(f"{name}={v} is not a vertex id")
    if target == taboo:
        raise ValueError("target and taboo must differ")
    if source == target:
        return 1.0
    if source == taboo:
        return 0.0

    P = _transition_matrix(tree)
    absorbing = np.zeros(n + 1, dtype=bool)
    absorbing[target + 1] = True
    absorbing[taboo + 1] = True
    trans = ~absorbing
    idx = np.flatnonzero(trans)
    Q = P[np.ix_(idx, idx)]
    b = P[idx, target + 1]
    try:
        h = np.linalg.solve(np.eye(idx.size) - Q, b)
    except np.linalg.LinAlgError as exc:
        raise ValueError(f"hitting system is singular: {exc}") from exc
    full = np.zeros(n + 1)
    full[idx] = h
    full[target + 1] = 1.0
    return float(full[source + 1])


def _absorbed_solution(tree: MarkedTree, target: int, taboo: int) -> np.ndarray:
    """Hitting probabilities of target (before taboo) for every state."""
    n = tree.size
    if n + 1 > ORACLE_STATE_CAP:
        raise ValueError(f"oracle limited to {ORACLE_STATE_CAP} states, tree has {n + 1}")
    P = _transition_matrix(tree)
    absorbing = np.zeros(n + 1, dtype=bool)
    absorbing[target + 1] = True
    absorbing[taboo + 1] = True
    idx = np.flatnonzero(~absorbing)
    Q = P[np.ix_(idx, idx)]
    b = P[idx, target + 1]
    try:
        h = np.linalg.solve(np.eye(idx.size) - Q, b)
    except np.linalg.LinAlgError as exc:
        raise ValueError(f"hitting system is singular: {exc}") from exc
    full = np.zeros(n + 1)
    full[idx] = h
    full[target + 1] = 1.0
    return full


def oracle_a(tree: MarkedTree, x: int) -> float:
    """P(excursion from the root visits x) by first-step decomposition."""
    if x == 0:
        raise ValueError("x must differ from the root")
    full = _absorbed_solution(tree, target=x, taboo=0)
    total = tree.wpar[0] * full[0]  # ghost state; absorbs back into the root
    c0, k = int(tree.cstart[0]), int(tree.nch[0])
    for c in range(c0, c0 + k):
        total += tree.wchild[c] * full[c + 1]
    return float(total)


def oracle_one_minus_p(tree: MarkedTree, x: int) -> float:
    """P(walk at x retreats to the root before revisiting x)."""
    if x == 0:
        raise ValueError("x must differ from the root")
    full = _absorbed_solution(tree, target=0, taboo=x)
    total = tree.wpar[x] * full[tree.parent[x] + 1]
    c0, k = int(tree.cstart[x]), int(tree.nch[x])
    for c in range(c0, c0 + k):
        total += tree.wchild[c] * full[c + 1]
    return float(total)


def excursion_rows(tree: MarkedTree, ids) -> list[tuple]:
    """(id, depth, U, a, p, mean) rows for CSV export."""
    rows = []
    for x in ids:
        ps = path_stats(tree, int(x))
        rows.append((int(x), int(tree.depth[x]), float(tree.U[x]),
                     ps.a, ps.p, ps.mean))
    return rows
