"""Offspring/displacement families and their boundary-case calibration.

The random environment is built from two ingredients at every vertex: an
offspring count N and i.i.d. displacements A_1..A_N attached to the children,
independent of N. The potential of a child is V(child) = V(parent) + A_i.
A family is *calibrated* when its first two tilted moments vanish:

    E[ sum_{|x|=1} e^{-V(x)} ] = E[N] * E[e^{-A}]      = 1
    E[ sum_{|x|=1} V(x) e^{-V(x)} ] = E[N] * E[A e^{-A}] = 0

which pins the walk to the recurrent critical regime this package studies.
All shipped families are discrete with finite displacement support, so every
moment here is an exact finite sum and calibration residuals can be driven to
machine precision.
"""

from __future__ import annotations

import json
import math
from dataclasses import dataclass, field
from functools import cached_property

import numpy as np
from scipy.optimize import brentq

# Offspring-sampler codes shared with the compiled kernels.
OFF_CONST = 0
OFF_GEOMETRIC = 1  # P(N=k) = (1-r) r^k on {0,1,2,...}
OFF_POISSON = 2

_OFFSPRING_CODES = {"const": OFF_CONST, "geometric": OFF_GEOMETRIC, "poisson": OFF_POISSON}

#: calibration residuals of every shipped law must sit below this
RESIDUAL_TOL = 1e-10

#: tolerance used by Brent's method on the scalar residual
_SOLVER_TOL = 1e-15


class CalibrationError(ValueError):
    """The requested family admits no calibrated solution, or residuals are out of tolerance."""


class DegenerateLawError(ValueError):
    """A law with sigma^2 = 0 was passed to a simulation entry point."""


def _offspring_mean(offspring: str, param: float) -> float:
    if offspring == "const":
        return float(param)
    if offspring == "geometric":
        r = param
        return r / (1.0 - r)
    if offspring == "poisson":
        return float(param)
    raise ValueError(f"unknown offspring kind {offspring!r}")


@dataclass(frozen=True)
class DisplacementLaw:
    """A calibrated (offspring, displacement) family.

    ``values``/``probs`` are the displacement atoms; children draw i.i.d.
    atoms independent of the offspring count. Instances are built by
    :func:`calibrate_law` or :func:`preset`; the constructor validates shape
    but does not re-solve the calibration equations.
    """

    family: str
    offspring: str
    offspring_param: float
    values: tuple[float, ...]
    probs: tuple[float, ...]
    residual_mass: float
    residual_mean: float
    sigma2: float
    mean_offspring: float
    delta_certificate: float

    def __post_init__(self) -> None:
        if self.offspring not in _OFFSPRING_CODES:
            raise ValueError(f"unknown offspring kind {self.offspring!r}")
        if len(self.values) != len(self.probs) or not self.values:
            raise ValueError("values and probs must be equal-length and non-empty")
        if any(not math.isfinite(v) for v in self.values):
            raise ValueError("displacement atoms must be finite")
        if any(p <= 0 for p in self.probs):
            raise ValueError("atom probabilities must be positive")
        if abs(math.fsum(self.probs) - 1.0) > 1e-12:
            raise ValueError("atom probabilities must sum to 1")

    # -- exact moments ----------------------------------------------------

    def psi_moment(self, t: float) -> float:
        """E[sum_{|x|=1} e^{-t V(x)}] = E[N] * E[e^{-t A}], exact."""
        return self.mean_offspring * math.fsum(
            p * math.exp(-t * v) for v, p in zip(self.values, self.probs)
        )

    def tilted_moment(self, k: int) -> float:
        """E[N] * E[A^k e^{-A}]: k=0 is the mass residual target 1, k=1 the mean, k=2 sigma^2."""
        return self.mean_offspring * math.fsum(
            p * v**k * math.exp(-v) for v, p in zip(self.values, self.probs)
        )

    def max_exp_neg_disp(self) -> float:
        """max_j e^{-v_j}; bounds e^{-A} and hence one-generation sums."""
        return math.exp(-min(self.values))

    def require_positive_sigma2(self) -> None:
        if not (self.sigma2 > 0.0):
            raise DegenerateLawError(
                f"family {self.family!r} has sigma^2 = {self.sigma2}; "
                "walks and spine samplers need sigma^2 > 0"
            )

    # -- sampler plumbing --------------------------------------------------

    @cached_property
    def kernel_args(self) -> tuple[int, float, np.ndarray, np.ndarray]:
        """(offspring code, offspring param, atom values, atom CDF) for the compiled samplers."""
        vals = np.asarray(self.values, dtype=np.float64)
        cdf = np.cumsum(np.asarray(self.probs, dtype=np.float64))
        cdf[-1] = 1.0  # guard the last bin against rounding
        return (_OFFSPRING_CODES[self.offspring], float(self.offspring_param), vals, cdf)

    def extinction_probability(self, tol: float = 1e-13, max_iter: int = 100000) -> float:
        """Fixed point of the offspring generating function, by iteration from 0."""
        s = 0.0
        for _ in range(max_iter):
            if self.offspring == "const":
                nxt = s ** int(self.offspring_param)
            elif self.offspring == "geometric":
                r = self.offspring_param
                nxt = (1.0 - r) / (1.0 - r * s)
            else:  # poisson
                nxt = math.exp(self.offspring_param * (s - 1.0))
            if abs(nxt - s) < tol:
                return nxt
            s = nxt
        return s

    # -- serialization -----------------------------------------------------

    def to_doc(self) -> dict:
        return {
            "family": self.family,
            "params": {
                "offspring": self.offspring,
                "offspring_param": self.offspring_param,
                "values": list(self.values),
                "probs": list(self.probs),
            },
            "residuals": {"mass": self.residual_mass, "mean": self.residual_mean},
            "sigma2": self.sigma2,
            "mean_offspring": self.mean_offspring,
            "delta_certificate": {
                "delta": self.delta_certificate,
                "psi_at_1_plus_delta": self.psi_moment(1.0 + self.delta_certificate),
                "psi_at_minus_delta": self.psi_moment(-self.delta_certificate),
            },
        }

    @classmethod
    def from_doc(cls, doc: dict) -> "DisplacementLaw":
        params = doc["params"]
        return cls(
            family=doc["family"],
            offspring=params["offspring"],
            offspring_param=float(params["offspring_param"]),
            values=tuple(float(v) for v in params["values"]),
            probs=tuple(float(p) for p in params["probs"]),
            residual_mass=float(doc["residuals"]["mass"]),
            residual_mean=float(doc["residuals"]["mean"]),
            sigma2=float(doc["sigma2"]),
            mean_offspring=float(doc["mean_offspring"]),
            delta_certificate=float(doc["delta_certificate"]["delta"]),
        )

    def dump(self, path) -> None:
        with open(path, "w", encoding="utf-8") as fh:
            json.dump(self.to_doc(), fh, indent=2, sort_keys=True)
            fh.write("\n")

    @classmethod
    def load(cls, path) -> "DisplacementLaw":
        with open(path, "r", encoding="utf-8") as fh:
            return cls.from_doc(json.load(fh))


# ---------------------------------------------------------------------------
# calibration
# ---------------------------------------------------------------------------


def _residuals(offspring: str, param: float, values, probs) -> tuple[float, float, float]:
    """(mass residual, mean residual, sigma2), all exact finite sums."""
    mu = _offspring_mean(offspring, param)
    mass = mu * math.fsum(p * math.exp(-v) for v, p in zip(values, probs)) - 1.0
    mean = mu * math.fsum(p * v * math.exp(-v) for v, p in zip(values, probs))
    sig2 = mu * math.fsum(p * v * v * math.exp(-v) for v, p in zip(values, probs))
    return mass, mean, sig2


def _finish(family, offspring, param, values, probs, delta=1.0) -> DisplacementLaw:
    mass, mean, sig2 = _residuals(offspring, param, values, probs)
    if abs(mass) > RESIDUAL_TOL or abs(mean) > RESIDUAL_TOL:
        raise CalibrationError(
            f"calibration of {family!r} left residuals (mass={mass:.3e}, mean={mean:.3e}) "
            f"above {RESIDUAL_TOL}"
        )
    return DisplacementLaw(
        family=family,
        offspring=offspring,
        offspring_param=float(param),
        values=tuple(float(v) for v in values),
        probs=tuple(float(p) for p in probs),
        residual_mass=mass,
        residual_mean=mean,
        sigma2=sig2,
        mean_offspring=_offspring_mean(offspring, param),
        delta_certificate=delta,
    )


def _calibrate_two_point(family: str, offspring: str, param: float, q: float) -> DisplacementLaw:
    """Solve for atoms {u, v} with P(A=u)=q under an offspring law of mean mu.

    The mass equation is solved in closed form for e^{-v}, leaving one
    bracketed scalar equation in u for Brent's method. Feasibility requires
    the low atom's tilted mass mu*q*e^{-u} to stay below 1, so mu*q < 1 (with
    the roles of the atoms swapped when instead mu*(1-q) < 1 holds).
    """
    mu = _offspring_mean(offspring, param)
    if mu <= 1.0:
        raise CalibrationError(f"offspring mean {mu} is not supercritical")
    if not 0.0 < q < 1.0:
        raise CalibrationError(f"atom probability q={q} outside (0,1)")

    swapped = False
    if mu * q >= 1.0:
        # the u-atom cannot carry tilted mass >= 1; try making it the high atom
        q = 1.0 - q
        swapped = True
        if mu * q >= 1.0:
            raise CalibrationError(
                f"two-point family with offspring mean {mu} and q={1-q} is infeasible: "
                "both atoms would need tilted mass >= 1 while the total must be exactly 1 "
                "with zero tilted mean (no real solution; q=1/2 at mean 2 is the classic case)"
            )

    def exp_neg_v(u: float) -> float:
        return (1.0 / mu - q * math.exp(-u)) / (1.0 - q)

    def resid(u: float) -> float:
        ev = exp_neg_v(u)
        v = -math.log(ev)
        return mu * (q * u * math.exp(-u) + (1.0 - q) * v * ev)

    lo = math.log(mu * q) + 1e-13
    hi = -1e-13
    if resid(lo) >= 0.0 or resid(hi) <= 0.0:  # pragma: no cover - guarded by feasibility above
        raise CalibrationError(f"no bracket for two-point family (mu={mu}, q={q})")
    u = brentq(resid, lo, hi, xtol=_SOLVER_TOL, rtol=8.9e-16)
    v = -math.log(exp_neg_v(u))
    values, probs = (u, v), (q, 1.0 - q)
    if swapped:
        values, probs = (v, u), (1.0 - q, q)
    return _finish(family, offspring, param, values, probs)


def _calibrate_three_point(
    family: str, mean: float, probs: tuple[float, float, float], mid: float
) -> DisplacementLaw:
    """Poisson offspring with atoms {u, mid, v}: mid is held fixed, (u, v) solved.

    Eliminating e^{-v} via the mass equation leaves a scalar equation in u;
    the bracket is found by a deterministic forward scan from the feasibility
    boundary (the residual map need not be monotone here).
    """
    if mean <= 1.0:
        raise CalibrationError(f"offspring mean {mean} is not supercritical")
    q1, q2, q3 = probs
    if abs((q1 + q2 + q3) - 1.0) > 1e-12 or min(q1, q2, q3) <= 0:
        raise CalibrationError(f"three-point probabilities {probs} invalid")
    budget = 1.0 / mean - q2 * math.exp(-mid)
    if budget <= 0.0:
        raise CalibrationError(
            f"fixed middle atom {mid} already exceeds the tilted mass budget at mean {mean}"
        )

    def exp_neg_v(u: float) -> float:
        return (budget - q1 * math.exp(-u)) / q3

    def resid(u: float) -> float:
        ev = exp_neg_v(u)
        v = -math.log(ev)
        return mean * (q1 * u * math.exp(-u) + q2 * mid * math.exp(-mid) + q3 * v * ev)

    lo = -math.log(budget / q1) + 1e-12
    # forward scan for the first sign change; deterministic and seed-free
    step, span = 0.05, 40.0
    u_left, f_left = lo, resid(lo)
    bracket = None
    u_right = lo + step
    while u_right <= lo + span:
        f_right = resid(u_right)
        if f_left * f_right <= 0.0:
            bracket = (u_left, u_right)
            break
        u_left, f_left = u_right, f_right
        u_right += step
    if bracket is None:
        raise CalibrationError(f"no calibrated solution found for {family!r} within scan range")
    u = brentq(resid, *bracket, xtol=_SOLVER_TOL, rtol=8.9e-16)
    v = -math.log(exp_neg_v(u))
    return _finish(family, "poisson", mean, (u, mid, v), (q1, q2, q3))


def calibrate_law(family: str, **params) -> DisplacementLaw:
    """Calibrate a named family. Unknown keys raise; residuals are verified.

    Families:
      f1          const offspring ``n`` (default 2), two-point atoms, ``q`` (default 0.25)
      f2          geometric offspring of mean ``mean`` (default 2.0), two-point atoms, ``q`` (default 0.3)
      f3          poisson offspring ``mean`` (default 1.8), three-point atoms with fixed
                  middle atom ``mid`` (default -0.4) and ``probs`` (default (0.3, 0.2, 0.5))
      degenerate  single child, zero displacement; sigma^2 = 0 fixture
    """
    family = family.lower()
    if family == "f1":
        allowed = {"n", "q"}
        _reject_unknown(family, params, allowed)
        n = int(params.get("n", 2))
        if n < 2:
            raise CalibrationError("f1 needs const offspring >= 2 to be supercritical")
        return _calibrate_two_point("f1", "const", float(n), float(params.get("q", 0.25)))
    if family == "f2":
        _reject_unknown(family, params, {"mean", "q"})
        mean = float(params.get("mean", 2.0))
        r = mean / (1.0 + mean)  # geometric parameter with that mean
        return _calibrate_two_point("f2", "geometric", r, float(params.get("q", 0.3)))
    if family == "f3":
        _reject_unknown(family, params, {"mean", "probs", "mid"})
        return _calibrate_three_point(
            "f3",
            float(params.get("mean", 1.8)),
            tuple(float(p) for p in params.get("probs", (0.3, 0.2, 0.5))),
            float(params.get("mid", -0.4)),
        )
    if family == "degenerate":
        _reject_unknown(family, params, set())
        return _finish("degenerate", "const", 1.0, (0.0,), (1.0,))
    raise CalibrationError(f"unknown family {family!r}; known: f1, f2, f3, degenerate")


def _reject_unknown(family: str, params: dict, allowed: set) -> None:
    unknown = set(params) - allowed
    if unknown:
        raise CalibrationError(f"unknown parameters for {family!r}: {sorted(unknown)}")


#: names accepted by :func:`preset` and the CLI ``--law`` flag
PRESET_NAMES = ("f1", "f2", "f3", "degenerate")


def preset(name: str) -> DisplacementLaw:
    """A shipped family with its default parameters."""
    return calibrate_law(name)
