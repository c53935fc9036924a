"""Headline diagnostics: local-time scaling, favorite sites, and thin tails.

This layer composes the environment, walk, and excursion machinery into the
reportable checks: the derivative-martingale level, the potential-minimizer
search with an explicit certification gap, the scaled-local-time comparison,
the favorite-site containment frequency, the high-potential local-time
ceiling, and the barrier-restricted weight sum.
"""

from __future__ import annotations

import heapq
import math
from concurrent.futures import ThreadPoolExecutor
from dataclasses import dataclass

import numpy as np

from .families import DisplacementLaw
from .rng import make_generator
from .tree import ArenaCapacityError, MarkedTree
from .walk import BarrierConfig, Walk, barrier_crossed

#: assumed ceiling on one-generation weight sums when certifying a minimizer
#: search against the unexplored frontier; log(1 + cap) = 3 by default
DEFAULT_LAMBDA_CAP = math.expm1(3.0)

#: extra slack added to the certification gap for potential dips below the
#: frontier that the cap alone does not cover
DEFAULT_V_MARGIN = 0.5

#: two minimizer candidates closer than this in U are reported as tied
U_TIE_TOL = 1e-12

#: rejection-sampling depth for conditioning on local survival
SURVIVAL_DEPTH = 30

_Z95 = 1.959963984540054


class ConditioningError(RuntimeError):
    """The sampled environment died before the requested depth."""


# ---------------------------------------------------------------------------
# derivative martingale and the variance constant
# ---------------------------------------------------------------------------


@dataclass(frozen=True)
class DinfEstimate:
    """D_depth with a stabilization diagnostic over the trailing window."""

    value: float
    depth: int
    stability: float        # max relative one-generation change in the window
    pre_asymptotic: bool    # depth too small for the window to mean anything


def estimate_Dinf(tree: MarkedTree, depth: int,
                  stability_window: int = 5) -> DinfEstimate:
    """Generation-``depth`` value of sum V(x) e^{-V(x)} plus its recent drift."""
    if depth < 0:
        raise ValueError("depth must be >= 0")
    if stability_window < 1:
        raise ValueError("stability_window must be >= 1")
    if not tree.survives_to(depth):
        raise ConditioningError(
            f"environment extinct before depth {depth}; resample")
    lo = max(0, depth - stability_window)
    levels = [tree.derivative_martingale(k) for k in range(lo, depth + 1)]
    value = levels[-1]
    scale = max(abs(value), 1e-300)
    diffs = [abs(b - a) / scale for a, b in zip(levels, levels[1:])]
    stability = max(diffs) if diffs else math.inf
    return DinfEstimate(value=value, depth=depth, stability=stability,
                        pre_asymptotic=depth < stability_window)


def default_dinf_depth(law: DisplacementLaw, budget: int = 200_000) -> int:
    """Deepest generation whose expected size stays within ``budget``."""
    mu = max(law.mean_offspring, 1.0 + 1e-9)
    return min(30, max(5, int(math.log(budget) / math.log(mu))))


def sigma2(law: DisplacementLaw) -> float:
    """Exact second tilted moment E[sum V^2 e^{-V}]; rejects degenerate laws."""
    law.require_positive_sigma2()
    return law.tilted_moment(2)


# ---------------------------------------------------------------------------
# potential minimizers
# ---------------------------------------------------------------------------


@dataclass(frozen=True)
class UminResult:
    minimizers: frozenset[int]
    min_value: float
    frontier_bound: float   # smallest V left unexpanded (inf if exhausted)
    lambda_cap: float
    certified: bool


def _best_first_scan(tree: MarkedTree, lambda_cap: float, v_margin: float,
                     budget: int) -> tuple[list[tuple[float, int]], float, bool]:
    """Expand vertices in increasing-V order until the ``budget`` smallest
    U values can no longer change.

    Returns (popped (U, id) pairs, frontier bound, exhausted-or-stopped flag);
    the flag is False only when the arena cap cut the scan short.
    """
    gap = math.log1p(lambda_cap) + v_margin
    heap: list[tuple[float, int]] = [(0.0, 0)]
    popped: list[tuple[float, int]] = []
    kth_best = math.inf
    while heap:
        v, x = heap[0]
        if len(popped) >= budget and v > kth_best + gap:
            return popped, v, True
        heapq.heappop(heap)
        try:
            kids = tree.expand(x) if tree.law is not None else tree.child_ids(x)
        except ArenaCapacityError:
            return popped, v, False
        popped.append((float(tree.U[x]), x))
        if len(popped) >= budget:
            kth_best = sorted(u for u, _ in popped)[budget - 1]
        for c in kids:
            heapq.heappush(heap, (float(tree.V[c]), int(c)))
    return popped, math.inf, True


def find_umin(tree: MarkedTree, lambda_cap: float = DEFAULT_LAMBDA_CAP,
              v_margin: float = DEFAULT_V_MARGIN) -> UminResult:
    """Locate the exact argmin set of U over the explored tree.

    The search expands by increasing V; once the cheapest frontier vertex
    sits more than log(1 + lambda_cap) + v_margin above the best U, nothing
    beyond the frontier can compete (assuming one-generation weight sums
    stay below lambda_cap) and the result is certified.
    """
    if lambda_cap <= 0:
        raise ValueError("lambda_cap must be positive")
    if v_margin < 0:
        raise ValueError("v_margin must be nonnegative")
    popped, frontier_bound, clean = _best_first_scan(
        tree, lambda_cap, v_margin, budget=1)
    min_value = min(u for u, _ in popped)
    minimizers = frozenset(x for u, x in popped if u <= min_value + U_TIE_TOL)
    certified = clean and frontier_bound - math.log1p(lambda_cap) > min_value
    return UminResult(minimizers=minimizers, min_value=min_value,
                      frontier_bound=frontier_bound, lambda_cap=lambda_cap,
                      certified=certified)


def lowest_u_vertices(tree: MarkedTree, budget: int,
                      lambda_cap: float = DEFAULT_LAMBDA_CAP,
                      v_margin: float = DEFAULT_V_MARGIN) -> list[tuple[float, int]]:
    """The ``budget`` smallest (U, id) pairs, certified the same way as
    find_umin; falls back to best-so-far when the arena cap intervenes."""
    if budget < 1:
        raise ValueError("budget must be >= 1")
    popped, _bound, _clean = _best_first_scan(tree, lambda_cap, v_margin, budget)
    return sorted(popped)[:budget]


# ---------------------------------------------------------------------------
# environment conditioning
# ---------------------------------------------------------------------------


def surviving_environment(law: DisplacementLaw, seed: int, replica: int,
                          label: str, depth: int = SURVIVAL_DEPTH,
                          max_tries: int = 512,
                          arena_cap: int = 1 << 22) -> MarkedTree:
    """Rejection-sample an environment surviving to ``depth``."""
    for attempt in range(max_tries):
        rng = make_generator(seed, replica, f"{label}:env:{attempt}")
        tree = MarkedTree(law, rng, arena_cap=arena_cap)
        if tree.survives_to(depth):
            return tree
    raise ConditioningError(
        f"no environment surviving to depth {depth} in {max_tries} tries")


# ---------------------------------------------------------------------------
# local-time scaling report
# ---------------------------------------------------------------------------


@dataclass(frozen=True)
class VertexRow:
    n: int
    vertex: int
    U: float
    measured: float     # mean over replicas of L_n(x) log n / n
    predicted: float    # (sigma^2 / 4 D) e^{-U(x)}
    ratio: float


@dataclass(frozen=True)
class ExcursionRow:
    vertex: int
    U: float
    mean: float         # mean over replicas of L at the m-th return, over m
    se: float
    predicted: float    # e^{-[U(x) - U(root)]}


@dataclass(frozen=True)
class ConvergenceReport:
    n_grid: tuple[int, ...]
    rows: tuple[VertexRow, ...]
    favorite_frequency: tuple[float, ...]   # per n: favorites inside argmin set
    dinf: float
    sigma2: float
    excursion_m: int
    excursion_rows: tuple[ExcursionRow, ...]
    replicas: int
    minimizers: frozenset[int]
    certified: bool


def theorem21_report(law: DisplacementLaw, seed: int,
                     n_grid=(10_000, 100_000), vertex_budget: int = 5, *,
                     replicas: int = 100, excursion_m: int = 1_000,
                     excursion_replicas: int = 16,
                     survival_depth: int = SURVIVAL_DEPTH,
                     dinf_depth: int | None = None,
                     lambda_cap: float = DEFAULT_LAMBDA_CAP,
                     v_margin: float = DEFAULT_V_MARGIN) -> ConvergenceReport:
    """Scaled local times on one surviving environment.

    Two diagnostics per low-U vertex: the raw statistic L_n(x) log n / n
    against (sigma^2 / 4 D) e^{-U(x)} (slow logarithmic approach, reported
    as a trend), and the excursion-normalized statistic L at the m-th root
    return over m, whose mean is exactly e^{-[U(x) - U(root)]}.
    """
    if vertex_budget < 1:
        raise ValueError("vertex_budget must be >= 1")
    if replicas < 2 or excursion_replicas < 2:
        raise ValueError("need at least 2 replicas")
    n_grid = tuple(sorted(int(n) for n in n_grid))
    if n_grid[0] < 2:
        raise ValueError("n values must be >= 2")
    tree = surviving_environment(law, seed, 0, "t21", depth=survival_depth)

    low = lowest_u_vertices(tree, vertex_budget, lambda_cap, v_margin)
    umin = find_umin(tree, lambda_cap, v_margin)
    if dinf_depth is None:
        dinf_depth = default_dinf_depth(law)
    dhat = estimate_Dinf(tree, dinf_depth).value
    s2 = sigma2(law)

    # raw time-n statistic, averaged over replica walks on the fixed tree
    sums = {(n, x): 0.0 for n in n_grid for _u, x in low}
    fav_inside = [0] * len(n_grid)
    for r in range(replicas):
        walk = Walk(tree, make_generator(seed, r, "t21:move"))
        done = 0
        for j, n in enumerate(n_grid):
            walk.run(n - done)
            done = n
            for _u, x in low:
                sums[(n, x)] += walk.local_time(x)
            if walk.favorites <= umin.minimizers:
                fav_inside[j] += 1
    rows = []
    for n in n_grid:
        for u, x in low:
            measured = (sums[(n, x)] / replicas) * math.log(n) / n
            predicted = (s2 / (4.0 * dhat)) * math.exp(-u)
            rows.append(VertexRow(n=n, vertex=x, U=u, measured=measured,
                                  predicted=predicted,
                                  ratio=measured / predicted))
    rows.sort(key=lambda r: (r.U, r.n, r.vertex))

    # excursion-normalized statistic: exact mean, Monte Carlo rate
    u_root = float(tree.U[0])
    targets = [(u_root, 0)] + [t for t in low if t[1] != 0]
    per_rep = {x: [] for _u, x in targets}
    for r in range(excursion_replicas):
        walk = Walk(tree, make_generator(seed, r, "t21:excursion"))
        walk.run_until_returns(excursion_m)
        for _u, x in targets:
            per_rep[x].append(walk.local_time(x) / excursion_m)
    exc_rows = []
    for u, x in targets:
        vals = np.asarray(per_rep[x])
        exc_rows.append(ExcursionRow(
            vertex=x, U=u, mean=float(vals.mean()),
            se=float(vals.std(ddof=1) / math.sqrt(vals.size)),
            predicted=math.exp(u_root - u)))
    exc_rows.sort(key=lambda r: (r.U, r.vertex))

    return ConvergenceReport(
        n_grid=n_grid, rows=tuple(rows),
        favorite_frequency=tuple(c / replicas for c in fav_inside),
        dinf=dhat, sigma2=s2, excursion_m=excursion_m,
        excursion_rows=tuple(exc_rows), replicas=replicas,
        minimizers=umin.minimizers, certified=umin.certified)


# ---------------------------------------------------------------------------
# favorite-site containment frequency
# ---------------------------------------------------------------------------


def wilson_interval(hits: int, n: int, z: float = _Z95) -> tuple[float, float]:
    """Binomial score interval; well-behaved at the 0 and 1 edges."""
    if n <= 0:
        return (0.0, 1.0)
    phat = hits / n
    denom = 1.0 + z * z / n
    center = (phat + z * z / (2 * n)) / denom
    half = (z / denom) * math.sqrt(phat * (1 - phat) / n + z * z / (4 * n * n))
    return (max(0.0, center - half), min(1.0, center + half))


@dataclass(frozen=True)
class FrequencyTable:
    n_grid: tuple[int, ...]
    counts: tuple[int, ...]          # replicas with favorites inside the set
    included: int
    excluded_uncertified: int
    excluded_extinct: int
    frequency: tuple[float, ...]
    ci_low: tuple[float, ...]
    ci_high: tuple[float, ...]
    audit_ok: bool
    replicas: int


def _c22_one_replica(law, seed, r, n_grid, survival_depth, lambda_cap,
                     v_margin):
    """One environment + walk. Returns (status, per-n hit flags, audit flag)."""
    rng = make_generator(seed, r, "c22:env")
    tree = MarkedTree(law, rng)
    if not tree.survives_to(survival_depth):
        return ("extinct", None, True)
    umin = find_umin(tree, lambda_cap, v_margin)
    if not umin.certified:
        return ("uncertified", None, True)
    walk = Walk(tree, make_generator(seed, r, "c22:move"))
    hits = []
    audit = True
    done = 0
    for n in n_grid:
        walk.run(n - done)
        done = n
        audit = audit and walk.audit_favorites()
        hits.append(walk.favorites <= umin.minimizers)
    return ("included", hits, audit)


def _replica_map(worker, replicas: int, jobs: int):
    """Run worker(r) for r in range, in submission order, on jobs threads.

    Replicas never share state (each derives its own generators), so the
    reduction below is order-stable regardless of thread count.
    """
    if jobs <= 1:
        return [worker(r) for r in range(replicas)]
    with ThreadPoolExecutor(max_workers=jobs) as pool:
        return list(pool.map(worker, range(replicas)))


def corollary22_frequency(law: DisplacementLaw, seed: int,
                          n_grid=(1_000, 1_000_000), replicas: int = 200, *,
                          survival_depth: int = SURVIVAL_DEPTH,
                          lambda_cap: float = DEFAULT_LAMBDA_CAP,
                          v_margin: float = DEFAULT_V_MARGIN,
                          jobs: int = 1) -> FrequencyTable:
    """Fraction of (environment, walk) pairs whose favorite sites all sit in
    the certified argmin set, per walk length."""
    if replicas < 100:
        raise ValueError("need at least 100 replicas for the frequency table")
    n_grid = tuple(sorted(int(n) for n in n_grid))
    if n_grid[0] < 2:
        raise ValueError("n values must be >= 2")

    def worker(r):
        return _c22_one_replica(law, seed, r, n_grid, survival_depth,
                                lambda_cap, v_margin)

    results = _replica_map(worker, replicas, jobs)
    counts = [0] * len(n_grid)
    included = excluded_uncert = excluded_ext = 0
    audit_ok = True
    for status, hits, audit in results:
        audit_ok = audit_ok and audit
        if status == "extinct":
            excluded_ext += 1
        elif status == "uncertified":
            excluded_uncert += 1
        else:
            included += 1
            for j, hit in enumerate(hits):
                counts[j] += hit
    freq = tuple(c / included if included else 0.0 for c in counts)
    ci = [wilson_interval(c, included) for c in counts]
    return FrequencyTable(
        n_grid=n_grid, counts=tuple(counts), included=included,
        excluded_uncertified=excluded_uncert, excluded_extinct=excluded_ext,
        frequency=freq, ci_low=tuple(lo for lo, _ in ci),
        ci_high=tuple(hi for _, hi in ci), audit_ok=audit_ok,
        replicas=replicas)


# ---------------------------------------------------------------------------
# high-potential local-time ceiling
# ---------------------------------------------------------------------------


def u_threshold(eps: float) -> float:
    """Potential level log(8 / eps^2) above which local times should stay
    below eps n / log n."""
    if not 0.0 < eps <= 1.0:
        raise ValueError("eps must be in (0, 1]")
    return math.log(8.0 / (eps * eps))


def high_potential_peak(tree: MarkedTree, walk: Walk, threshold: float) -> float:
    """Largest local time among visited vertices with U at or above the
    threshold; 0 when no visited vertex qualifies."""
    ids = walk.visited_ids()
    if ids.size == 0:
        return 0.0
    sel = tree.U[ids] >= threshold
    if not sel.any():
        return 0.0
    return float(max(walk.local_time(int(x)) for x in ids[sel]))


@dataclass(frozen=True)
class Prop23Table:
    eps_grid: tuple[float, ...]
    n_grid: tuple[int, ...]
    thresholds: tuple[float, ...]
    counts: tuple[tuple[int, ...], ...]       # [eps][n] exceedance counts
    probability: tuple[tuple[float, ...], ...]
    replicas_used: int
    replicas: int


def _p23_one_replica(law, seed, r, eps_grid, thresholds, n_grid,
                     survival_depth):
    """One environment + walk. Returns the [eps][n] exceedance flags, or
    None when the environment dies before the survival depth."""
    rng = make_generator(seed, r, "p23:env")
    tree = MarkedTree(law, rng)
    if not tree.survives_to(survival_depth):
        return None
    walk = Walk(tree, make_generator(seed, r, "p23:move"))
    flags = [[False] * len(n_grid) for _ in eps_grid]
    done = 0
    for j, n in enumerate(n_grid):
        walk.run(n - done)
        done = n
        bar = n / math.log(n)
        for i, thr in enumerate(thresholds):
            flags[i][j] = high_potential_peak(tree, walk, thr) > eps_grid[i] * bar
    return flags


def prop23_diagnostic(law: DisplacementLaw, eps_grid, n_grid,
                      replicas: int = 100, *, seed: int = 0,
                      survival_depth: int = SURVIVAL_DEPTH,
                      jobs: int = 1) -> Prop23Table:
    """Empirical probability that some visited vertex with U above the
    eps-threshold carries local time above eps n / log n."""
    eps_grid = tuple(float(e) for e in eps_grid)
    thresholds = tuple(u_threshold(e) for e in eps_grid)
    n_grid = tuple(sorted(int(n) for n in n_grid))
    if n_grid[0] < 2:
        raise ValueError("n values must be >= 2")
    if replicas < 2:
        raise ValueError("need at least 2 replicas")

    def worker(r):
        return _p23_one_replica(law, seed, r, eps_grid, thresholds, n_grid,
                                survival_depth)

    results = _replica_map(worker, replicas, jobs)
    counts = [[0] * len(n_grid) for _ in eps_grid]
    used = 0
    for flags in results:
        if flags is None:
            continue
        used += 1
        for i in range(len(eps_grid)):
            for j in range(len(n_grid)):
                counts[i][j] += flags[i][j]
    prob = tuple(tuple(c / used if used else 0.0 for c in row) for row in counts)
    return Prop23Table(eps_grid=eps_grid, n_grid=n_grid, thresholds=thresholds,
                       counts=tuple(tuple(row) for row in counts),
                       probability=prob, replicas_used=used, replicas=replicas)


# ---------------------------------------------------------------------------
# barrier-restricted weight sum
# ---------------------------------------------------------------------------


#: best-first enumeration budget; the kept set can be infinite on survival
#: (rising rays keep the ancestor functional bounded forever), so only the
#: weighted mass is finite and the tail has to be truncated explicitly
BARRIER_VERTEX_BUDGET = 1 << 21


@dataclass(frozen=True)
class BarrierSumResult:
    value: float            # (1 / log n) sum of e^{-U} over the kept set
    vertex_count: int
    complete: bool          # enumeration finished exactly (frontier emptied)
    threshold: float
    n: int
    gamma: float
    frontier_mass: float    # sum of e^{-V} over the unexplored frontier
    arena_limited: bool     # the arena cap, not the budget, stopped the scan

    def converged(self, rel_tol: float = 1e-3) -> bool:
        """True when the truncated frontier carries negligible relative
        weight. The dropped mass is the frontier mass times the expected
        extra generations each frontier ray survives below the barrier (a
        threshold-dependent constant), so rel_tol is a diagnostic knob, not
        a hard error bound; pair it with a budget-doubling stability check
        when the value itself is the quantity of interest."""
        if self.complete:
            return True
        scale = max(abs(self.value), 1e-300) * math.log(self.n)
        return self.frontier_mass <= rel_tol * scale


def barrier_sum(tree: MarkedTree, n: int, gamma: float,
                max_vertices: int = BARRIER_VERTEX_BUDGET) -> BarrierSumResult:
    """Weight sum over vertices none of whose proper ancestors crossed the
    ratio barrier n / (log n)^gamma.

    Enumeration is best-first by V (largest weights first) and pruned exactly
    at the first crossing generation, so a budgeted stop drops only the
    lightest tail; the leftover frontier mass is reported so callers can
    judge the truncation. The kept set itself is typically infinite on a
    surviving environment, hence no budget means no termination.
    """
    if gamma >= 2.0:
        raise ValueError("gamma must be < 2")
    if max_vertices < 1:
        raise ValueError("max_vertices must be >= 1")
    cfg = BarrierConfig(horizon=n, gamma=gamma)
    terms: list[float] = []
    heap: list[tuple[float, int]] = [(0.0, 0)]
    complete = True
    arena_limited = False
    while heap:
        if len(terms) >= max_vertices:
            complete = False
            break
        _, x = heapq.heappop(heap)
        try:
            kids = tree.expand(x) if tree.law is not None else tree.child_ids(x)
        except ArenaCapacityError:
            complete = False
            arena_limited = True
            heapq.heappush(heap, (float(tree.V[x]), x))
            break
        terms.append(math.exp(-float(tree.U[x])))
        # descendants of a crossing vertex acquire a crossed proper ancestor
        if not barrier_crossed(tree, x, cfg):
            for c in kids:
                heapq.heappush(heap, (float(tree.V[c]), int(c)))
    frontier = math.fsum(math.exp(-v) for v, _ in heap) if heap else 0.0
    return BarrierSumResult(value=math.fsum(terms) / math.log(n),
                            vertex_count=len(terms), complete=complete,
                            threshold=cfg.threshold, n=n, gamma=gamma,
                            frontier_mass=frontier, arena_limited=arena_limited)
