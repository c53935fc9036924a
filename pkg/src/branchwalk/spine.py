"""The tilted one-dimensional walk attached to a displacement law.

Size-biasing one generation of the environment and discounting by e^{-V}
turns the branching structure into a centered random walk (S_i) with
variance sigma^2 per step. This module builds that step law exactly, checks
the two-sided generation-sum identity by Monte Carlo, and estimates the
ladder/record functionals used by the local-time normalization arguments.
"""

from __future__ import annotations

import math
from dataclasses import dataclass
from functools import cached_property
from itertools import product

import numpy as np

from . import _kernels
from .families import CalibrationError, DisplacementLaw

#: hard cap on stopped-path length; heavy-tailed stopping times are truncated
#: here and the truncated fraction is reported alongside the estimate
PATH_CAP = 10**6

#: built-in functionals g(path, mass) for the two-sided check; `last` is the
#: path's final value, `minpath` its minimum, `mass` the one-generation
#: weight sum attached to the endpoint. Generation sums of id 5 are exactly
#: the derivative martingale, so its tree-side mean doubles as a D_n sampler
#: and its spine side reduces to the centered step mean.
G_LIBRARY = {
    0: "1 (counts generation size)",
    1: "exp(-last) (the critical martingale weight)",
    2: "1{minpath >= -1} * min(mass, 5)",
    3: "1{last <= 1}",
    4: "min(mass, 3)",
    5: "last * exp(-last) (derivative martingale summand)",
}

_NEEDS_MASS = frozenset({2, 4})


@dataclass(frozen=True)
class TiltedStepLaw:
    """Exact step distribution P(dS = v) = E[N] P(A = v) e^{-v}."""

    support: tuple[float, ...]
    probabilities: tuple[float, ...]

    def __post_init__(self) -> None:
        mass = math.fsum(self.probabilities)
        if abs(mass - 1.0) > 1e-12:
            raise CalibrationError(
                f"tilted step law has mass {mass!r}; the source law is not "
                "calibrated to the critical normalization")
        if any(p < 0 for p in self.probabilities):
            raise CalibrationError("tilted probabilities must be nonnegative")

    @property
    def mean(self) -> float:
        return math.fsum(p * v for v, p in zip(self.support, self.probabilities))

    @property
    def variance(self) -> float:
        m = self.mean
        return math.fsum(p * (v - m) ** 2
                         for v, p in zip(self.support, self.probabilities))

    def mgf(self, a: float) -> float:
        """E[e^{a dS}]; finite for every a on discrete bounded support."""
        return math.fsum(p * math.exp(a * v)
                         for v, p in zip(self.support, self.probabilities))

    @cached_property
    def kernel_args(self) -> tuple[np.ndarray, np.ndarray]:
        vals = np.asarray(self.support, dtype=np.float64)
        cdf = np.cumsum(np.asarray(self.probabilities, dtype=np.float64))
        cdf[-1] = 1.0
        return vals, cdf

    def sample(self, rng: np.random.Generator, size: int) -> np.ndarray:
        vals, cdf = self.kernel_args
        idx = np.searchsorted(cdf, rng.random(size), side="left")
        return vals[idx]


def tilted_law(law: DisplacementLaw) -> TiltedStepLaw:
    """Tilt a calibrated displacement law into its centered step law."""
    probs = tuple(law.mean_offspring * p * math.exp(-v)
                  for v, p in zip(law.values, law.probs))
    return TiltedStepLaw(support=tuple(law.values), probabilities=probs)


# ---------------------------------------------------------------------------
# paths and path statistics
# ---------------------------------------------------------------------------


@dataclass(frozen=True)
class SpinePath:
    """One realized path with its record functionals.

    Index i of every array refers to time i; position 0 is the start. The
    running max/min are over steps 1..i (zero at i=0 by convention), and
    ``record_drop[i]`` is the largest gap to the running max seen by time i.
    """

    S: np.ndarray
    running_max: np.ndarray
    running_min: np.ndarray
    record_drop: np.ndarray
    ladder_times: np.ndarray
    lam: float | None = None
    tau_lambda: int | None = None
    sigma_neg: int | None = None

    @property
    def k(self) -> int:
        return self.S.size - 1


def spine_path_from_steps(increments, lam: float | None = None) -> SpinePath:
    """Assemble a SpinePath (and its lam-stopping times) from raw steps."""
    inc = np.asarray(increments, dtype=np.float64)
    S = np.concatenate(([0.0], np.cumsum(inc)))
    k = inc.size
    rmax = np.concatenate(([0.0], np.maximum.accumulate(S[1:]))) if k else S[:1].copy()
    rmin = np.concatenate(([0.0], np.minimum.accumulate(S[1:]))) if k else S[:1].copy()
    drops = rmax - S
    drops[0] = 0.0
    record_drop = np.maximum.accumulate(drops)

    # strict records above the whole history, which starts at S_0 = 0
    prev_best = np.maximum.accumulate(S)[:-1] if k else np.empty(0)
    hits = np.flatnonzero(S[1:] > prev_best) + 1
    ladder_times = np.concatenate(([0], hits)).astype(np.int64)

    tau = sigma = None
    if lam is not None:
        if lam <= 0:
            raise ValueError("lam must be positive")
        over = np.flatnonzero(drops[1:] > lam)
        tau = int(over[0] + 1) if over.size else None
        under = np.flatnonzero(S < -lam)
        sigma = int(under[0]) if under.size else None
    return SpinePath(S=S, running_max=rmax, running_min=rmin,
                     record_drop=record_drop, ladder_times=ladder_times,
                     lam=lam, tau_lambda=tau, sigma_neg=sigma)


def simulate_path(tlaw: TiltedStepLaw, k: int, rng: np.random.Generator,
                  lam: float | None = None) -> SpinePath:
    if k < 1:
        raise ValueError("need k >= 1 steps")
    return spine_path_from_steps(tlaw.sample(rng, k), lam=lam)


@dataclass(frozen=True)
class SpineStatistics:
    """Per-trial endpoint summaries of length-k paths."""

    k: int
    smax: np.ndarray
    smin: np.ndarray
    record_drop: np.ndarray
    ladder_counts: np.ndarray


def spine_statistics(law: DisplacementLaw, k: int, trials: int,
                     rng: np.random.Generator) -> SpineStatistics:
    if k < 1:
        raise ValueError("need k >= 1")
    if trials < 1:
        raise ValueError("need trials >= 1")
    vals, cdf = tilted_law(law).kernel_args
    smax = np.empty(trials)
    smin = np.empty(trials)
    sdrop = np.empty(trials)
    ladders = np.empty(trials, dtype=np.int64)
    _kernels.spine_stats_kernel(rng, vals, cdf, k, trials,
                                smax, smin, sdrop, ladders)
    return SpineStatistics(k=k, smax=smax, smin=smin, record_drop=sdrop,
                           ladder_counts=ladders)


@dataclass(frozen=True)
class PersistenceCurve:
    """Survival of the one-sided minimum barrier over a k grid."""

    alpha: float
    ks: np.ndarray
    survival: np.ndarray
    trials: int
    slope: float


def persistence_curve(law: DisplacementLaw, alpha: float = 1.0,
                      ks=None, trials: int = 100_000,
                      rng: np.random.Generator | None = None) -> PersistenceCurve:
    """P(min over 1..k of S >= -alpha) on a log-spaced k grid, with the
    least-squares log-log slope (the classical value is -1/2)."""
    if rng is None:
        raise ValueError("pass an explicit generator")
    if alpha <= 0:
        raise ValueError("alpha must be positive")
    if ks is None:
        ks = np.unique(np.round(np.logspace(2, 4, 9)).astype(np.int64))
    ks = np.asarray(ks, dtype=np.int64)
    vals, cdf = tilted_law(law).kernel_args
    times = np.empty(trials, dtype=np.int64)
    _kernels.persistence_kernel(rng, vals, cdf, alpha, int(ks.max()), trials, times)
    survival = np.array([(times > k).mean() for k in ks])
    pos = survival > 0
    if pos.sum() >= 2:
        slope = float(np.polyfit(np.log(ks[pos]), np.log(survival[pos]), 1)[0])
    else:
        slope = math.nan
    return PersistenceCurve(alpha=alpha, ks=ks, survival=survival,
                            trials=trials, slope=slope)


# ---------------------------------------------------------------------------
# two-sided generation-sum identity
# ---------------------------------------------------------------------------


@dataclass(frozen=True)
class ManyToOneResult:
    g_id: int
    n: int
    lhs: float
    rhs: float
    se_lhs: float
    se_rhs: float
    trials: int

    @property
    def combined_se(self) -> float:
        return math.hypot(self.se_lhs, self.se_rhs)

    @property
    def gap(self) -> float:
        return abs(self.lhs - self.rhs)


#: per-level scratch size for the generation-streaming side; offspring tails
#: at n <= 6 put astronomically little mass past this
_LEVEL_BUF = 1 << 16


def many_to_one_check(law: DisplacementLaw, n: int, g_id: int, *,
                      trials: int = 100_000, rng: np.random.Generator,
                      inner: int = 1) -> ManyToOneResult:
    """Monte Carlo of both sides of the generation-sum identity.

    lhs averages sum_{|x|=n} g(path to x, mass at x) over fresh trees; rhs
    averages e^{S_n} g(S path, independent one-generation mass) over tilted
    paths. ``inner`` controls the inner sample size for the mass argument.
    """
    if not 1 <= n <= 6:
        raise ValueError("n must be in 1..6; the tree side grows exponentially")
    if g_id not in G_LIBRARY:
        raise ValueError(f"unknown g_id {g_id}; known: {sorted(G_LIBRARY)}")
    if trials < 2:
        raise ValueError("need trials >= 2")
    if inner < 1:
        raise ValueError("need inner >= 1")
    off_kind, off_param, vals, cdf = law.kernel_args
    need_mass = g_id in _NEEDS_MASS

    vprev = np.empty(_LEVEL_BUF)
    mprev = np.empty(_LEVEL_BUF)
    vcur = np.empty(_LEVEL_BUF)
    mcur = np.empty(_LEVEL_BUF)
    tot, tot2, done, overflow = _kernels.m2o_lhs_kernel(
        rng, off_kind, off_param, vals, cdf, n, g_id, need_mass,
        trials, vprev, mprev, vcur, mcur)
    if overflow:
        raise RuntimeError(
            f"{overflow} trials outgrew the per-generation buffer ({_LEVEL_BUF})")
    lhs = tot / done
    var_lhs = max(tot2 / done - lhs * lhs, 0.0)
    se_lhs = math.sqrt(var_lhs / done)

    tvals, tcdf = tilted_law(law).kernel_args
    rtot, rtot2 = _kernels.m2o_rhs_kernel(
        rng, off_kind, off_param, vals, cdf, tvals, tcdf,
        n, g_id, need_mass, inner, trials)
    rhs = rtot / trials
    var_rhs = max(rtot2 / trials - rhs * rhs, 0.0)
    se_rhs = math.sqrt(var_rhs / trials)
    return ManyToOneResult(g_id=g_id, n=n, lhs=lhs, rhs=rhs,
                           se_lhs=se_lhs, se_rhs=se_rhs, trials=trials)


# ---------------------------------------------------------------------------
# stopped-path estimates
# ---------------------------------------------------------------------------


@dataclass(frozen=True)
class StoppedSumEstimate:
    value: float
    se: float
    truncated_fraction: float
    b: float
    lam: float
    cap: int
    trials: int


def estimate_3_8(law: DisplacementLaw, b: float, lam: float, *,
                 trials: int = 10_000, rng: np.random.Generator,
                 cap: int = PATH_CAP) -> StoppedSumEstimate:
    """Mean of sum_{l < tau_lam} e^{-b (lam - drop_l)} over tilted paths.

    tau_lam is the first time the gap to the running max exceeds lam. Paths
    are truncated at ``cap`` steps; the estimate is then a lower bound and
    the truncated fraction quantifies how much mass was cut.
    """
    if not 0.0 < b < law.delta_certificate:
        raise ValueError(
            f"b={b} outside (0, {law.delta_certificate}) supported by the law")
    if lam <= 0:
        raise ValueError("lam must be positive")
    if trials < 2:
        raise ValueError("need trials >= 2")
    vals, cdf = tilted_law(law).kernel_args
    out = np.empty(trials)
    trunc = np.empty(trials, dtype=np.uint8)
    _kernels.e38_kernel(rng, vals, cdf, b, lam, cap, trials, out, trunc)
    value = float(out.mean())
    se = float(out.std(ddof=1) / math.sqrt(trials))
    return StoppedSumEstimate(value=value, se=se,
                              truncated_fraction=float(trunc.mean()),
                              b=b, lam=lam, cap=cap, trials=trials)


def ahz_subquantity(law: DisplacementLaw, b: float, lam: float, *,
                    trials: int = 10_000, rng: np.random.Generator,
                    cap: int = PATH_CAP) -> StoppedSumEstimate:
    """Mean of sum_{l < H_1} e^{-b S_l} 1{path stayed above -lam}.

    H_1 is the first strict ascent above the start; the indicator kills the
    path once it dips below -lam, so the loop stops at whichever comes first.
    """
    if b <= 0:
        raise ValueError("b must be positive")
    if lam <= 0:
        raise ValueError("lam must be positive")
    if trials < 2:
        raise ValueError("need trials >= 2")
    vals, cdf = tilted_law(law).kernel_args
    out = np.empty(trials)
    trunc = np.empty(trials, dtype=np.uint8)
    _kernels.ahz_kernel(rng, vals, cdf, b, lam, cap, trials, out, trunc)
    value = float(out.mean())
    se = float(out.std(ddof=1) / math.sqrt(trials))
    return StoppedSumEstimate(value=value, se=se,
                              truncated_fraction=float(trunc.mean()),
                              b=b, lam=lam, cap=cap, trials=trials)


# ---------------------------------------------------------------------------
# one-generation mass tail
# ---------------------------------------------------------------------------


@dataclass(frozen=True)
class MassTailCheck:
    delta1: float
    moment: float
    moment_se: float
    lambda_grid: np.ndarray
    tail: np.ndarray
    products: np.ndarray          # tail * lambda^{1+delta1}
    support_bound: float | None   # exact cutoff when offspring is bounded
    trials: int


def _one_generation_sums(law: DisplacementLaw, trials: int,
                         rng: np.random.Generator) -> np.ndarray:
    """Samples of 1 + sum over one generation of e^{-V(x)}."""
    kind = law.offspring
    if kind == "const":
        n = np.full(trials, int(law.offspring_param), dtype=np.int64)
    elif kind == "geometric":
        # offspring counts live on {0,1,...}; numpy's geometric starts at 1
        n = rng.geometric(1.0 - law.offspring_param, trials).astype(np.int64) - 1
    else:
        n = rng.poisson(law.offspring_param, trials).astype(np.int64)
    total = int(n.sum())
    vals, cdf = law.kernel_args[2], law.kernel_args[3]
    draws = vals[np.searchsorted(cdf, rng.random(total), side="left")]
    w = np.exp(-draws)
    bounds = np.concatenate(([0], np.cumsum(n)))
    csum = np.concatenate(([0.0], np.cumsum(w)))
    return 1.0 + (csum[bounds[1:]] - csum[bounds[:-1]])


def lambda_tail_check(law: DisplacementLaw, *, trials: int = 100_000,
                      rng: np.random.Generator, delta1: float = 1.0,
                      lambda_grid=None) -> MassTailCheck:
    """Moment and tail of the one-generation weight sum X = 1 + sum e^{-V}.

    Estimates E[X^{1+delta1}] and P(X > lam) on a grid; their product with
    lam^{1+delta1} stays below the moment by Markov's inequality, which is
    the boundedness being verified downstream.
    """
    if trials < 2:
        raise ValueError("need trials >= 2")
    if delta1 <= 0:
        raise ValueError("delta1 must be positive")
    if lambda_grid is None:
        lambda_grid = np.array([2.0, 4.0, 8.0, 16.0, 32.0, 64.0])
    lambda_grid = np.asarray(lambda_grid, dtype=np.float64)
    x = _one_generation_sums(law, trials, rng)
    powx = x ** (1.0 + delta1)
    moment = float(powx.mean())
    moment_se = float(powx.std(ddof=1) / math.sqrt(trials))
    tail = np.array([(x > lam).mean() for lam in lambda_grid])
    products = tail * lambda_grid ** (1.0 + delta1)
    bound = None
    if law.offspring == "const":
        bound = 1.0 + law.offspring_param * law.max_exp_neg_disp()
    return MassTailCheck(delta1=delta1, moment=moment, moment_se=moment_se,
                         lambda_grid=lambda_grid, tail=tail, products=products,
                         support_bound=bound, trials=trials)


def exact_one_generation_moment(law: DisplacementLaw, delta1: float = 1.0) -> float:
    """Closed-form E[(1 + sum e^{-V})^{1+delta1}] for constant offspring.

    Enumerates the finite atom assignments; rejects unbounded offspring where
    no finite enumeration exists.
    """
    if law.offspring != "const":
        raise ValueError("finite enumeration requires constant offspring")
    n = int(law.offspring_param)
    if len(law.values) ** n > 1_000_000:
        raise ValueError("atom assignment space too large to enumerate")
    total = 0.0
    for combo in product(range(len(law.values)), repeat=n):
        prob = 1.0
        s = 1.0
        for j in combo:
            prob *= law.probs[j]
            s += math.exp(-law.values[j])
        total += prob * s ** (1.0 + delta1)
    return total
