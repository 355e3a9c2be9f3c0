"""Variance profiles and their concave-hull reduction.

A profile is a piecewise constant standard deviation ``sigma(s)`` on [0,1],
encoded by the value list ``sigmas`` and the right endpoints ``lambdas`` of
the constancy intervals.  The cumulative variance

    J(s) = integral of sigma^2 over [0, s]

is piecewise linear; its upper concave envelope determines the effective
scales (envelope vertices) and the effective variances (square roots of the
envelope slopes).  Everything downstream (predictions, barriers, counting
experiments) consumes the reduced form.
"""

from __future__ import annotations

import json
import math
from dataclasses import dataclass

import numpy as np

DEFAULT_TOL = 1e-9

# absolute slack when checking that a scale times n is an integer
_TIME_EPS = 1e-6


class ProfileError(ValueError):
    """A profile or a derived quantity violates one of its invariants."""


class NonIntegralTime(ProfileError):
    """A scale parameter times the horizon is not an integer (strict mode)."""


@dataclass(frozen=True)
class VarianceProfile:
    """Piecewise constant variance parameters.

    ``sigmas[i]`` is the standard deviation per unit time on the interval
    ``(lambdas[i-1], lambdas[i]]`` (with ``lambdas[-1]`` read as 0).
    Requires 0 < lambdas[0] < ... < lambdas[-1] == 1 and sigmas > 0.
    """

    sigmas: tuple
    lambdas: tuple

    def __post_init__(self):
        sig = tuple(float(x) for x in self.sigmas)
        lam = tuple(float(x) for x in self.lambdas)
        object.__setattr__(self, "sigmas", sig)
        object.__setattr__(self, "lambdas", lam)
        if len(sig) == 0 or len(sig) != len(lam):
            raise ProfileError(
                "sigmas and lambdas must be non-empty and of equal length"
            )
        if any(s <= 0.0 or not math.isfinite(s) for s in sig):
            raise ProfileError("every sigma must be finite and > 0")
        prev = 0.0
        for x in lam:
            if not (x > prev):
                raise ProfileError("lambdas must be strictly increasing in (0, 1]")
            prev = x
        if abs(lam[-1] - 1.0) > 1e-12:
            raise ProfileError("the last lambda must equal 1")
        if lam[-1] != 1.0:
            object.__setattr__(self, "lambdas", lam[:-1] + (1.0,))

    @property
    def size(self) -> int:
        return len(self.sigmas)

    def breakpoints(self):
        """Breakpoints (0, lam_1, ..., lam_M) and cumulative variance there."""
        xs = np.empty(self.size + 1)
        ys = np.empty(self.size + 1)
        xs[0] = ys[0] = 0.0
        acc = 0.0
        prev = 0.0
        for i, (s, x) in enumerate(zip(self.sigmas, self.lambdas), start=1):
            acc += s * s * (x - prev)
            xs[i] = x
            ys[i] = acc
            prev = x
        return xs, ys

    def to_dict(self) -> dict:
        return {"sigmas": list(self.sigmas), "lambdas": list(self.lambdas)}

    @classmethod
    def from_dict(cls, doc: dict) -> "VarianceProfile":
        return cls(sigmas=tuple(doc["sigmas"]), lambdas=tuple(doc["lambdas"]))


def load_profile(path) -> VarianceProfile:
    """Read a profile from a JSON document {"sigmas": [...], "lambdas": [...]}."""
    with open(path, "r", encoding="utf-8") as fh:
        doc = json.load(fh)
    return VarianceProfile.from_dict(doc)


def integral_J(profile: VarianceProfile, s1: float, s2: float) -> float:
    """Cumulative variance of the increments over rescaled time [s1, s2].

    Computed exactly as a finite sum of sigma_i^2 times the overlap of each
    constancy interval with [s1, s2].
    """
    if not (0.0 <= s1 <= s2 <= 1.0):
        raise ProfileError(f"need 0 <= s1 <= s2 <= 1, got s1={s1}, s2={s2}")
    total = 0.0
    prev = 0.0
    for s, x in zip(profile.sigmas, profile.lambdas):
        overlap = min(x, s2) - max(prev, s1)
        if overlap > 0.0:
            total += s * s * overlap
        prev = x
    return total


@dataclass(frozen=True)
class EffectiveProfile:
    """Concave-hull reduction of a variance profile.

    Sequences are indexed by effective segment j = 1..m at position j-1.
    ``pi[j-1]`` is the raw breakpoint index i (with lam_0 = 0) such that
    lambdas[i-1] equals eff_lambdas[j-1].  ``coincidence_points`` lists every
    raw breakpoint where the cumulative variance meets its envelope, and
    ``restricted`` records that no segment is met on a proper sub-interval
    only.
    """

    eff_lambdas: tuple
    eff_sigmas: tuple
    delta: tuple
    delta_left: tuple
    delta_right: tuple
    pi: tuple
    coincidence_points: tuple
    restricted: bool

    @property
    def m(self) -> int:
        return len(self.eff_lambdas)

    def as_profile(self) -> VarianceProfile:
        """The reduced parameters viewed as a profile in their own right."""
        return VarianceProfile(sigmas=self.eff_sigmas, lambdas=self.eff_lambdas)

    def integral(self, s: float) -> float:
        """Envelope value at rescaled time s (cumulative effective variance)."""
        return integral_J(self.as_profile(), 0.0, s)

    def to_dict(self) -> dict:
        return {
            "m": self.m,
            "eff_lambdas": list(self.eff_lambdas),
            "sigma_bar": list(self.eff_sigmas),
            "delta": list(self.delta),
            "delta_left": list(self.delta_left),
            "delta_right": list(self.delta_right),
            "pi": list(self.pi),
            "coincidence_points": list(self.coincidence_points),
            "restricted": self.restricted,
        }

    @classmethod
    def from_dict(cls, doc: dict) -> "EffectiveProfile":
        return cls(
            eff_lambdas=tuple(doc["eff_lambdas"]),
            eff_sigmas=tuple(doc["sigma_bar"]),
            delta=tuple(doc["delta"]),
            delta_left=tuple(doc["delta_left"]),
            delta_right=tuple(doc["delta_right"]),
            pi=tuple(doc["pi"]),
            coincidence_points=tuple(doc["coincidence_points"]),
            restricted=bool(doc["restricted"]),
        )


def concave_hull(profile: VarianceProfile, tol: float = DEFAULT_TOL) -> EffectiveProfile:
    """Reduce a profile to its effective parameters.

    Builds the upper concave envelope of the cumulative variance over its
    breakpoints, merges collinear envelope segments (slopes equal within
    ``tol``) so the effective standard deviations decrease strictly, and
    classifies per-segment coincidence between the cumulative variance and
    its envelope.
    """
    if not (tol > 0.0):
        raise ProfileError("tol must be > 0")
    xs, ys = profile.breakpoints()
    M = profile.size
    scale = max(1.0, ys[-1])

    # upper envelope by monotone stack; pop the middle point whenever the
    # incoming slope is not strictly below the previous one (within tol)
    hull = [0]
    for i in range(1, M + 1):
        while len(hull) >= 2:
            a, b = hull[-2], hull[-1]
            slope_ab = (ys[b] - ys[a]) / (xs[b] - xs[a])
            slope_bi = (ys[i] - ys[b]) / (xs[i] - xs[b])
            if slope_ab <= slope_bi + tol * max(1.0, abs(slope_ab)):
                hull.pop()
            else:
                break
        hull.append(i)

    # envelope value at every raw breakpoint
    env = np.array(ys, dtype=float)
    for a, b in zip(hull, hull[1:]):
        if b - a > 1:
            frac = (xs[a + 1 : b] - xs[a]) / (xs[b] - xs[a])
            env[a + 1 : b] = ys[a] + frac * (ys[b] - ys[a])
    coincide = np.abs(env - ys) <= tol * scale

    eff_lambdas = tuple(float(xs[i]) for i in hull[1:])
    eff_sigmas = tuple(
        math.sqrt((ys[b] - ys[a]) / (xs[b] - xs[a])) for a, b in zip(hull, hull[1:])
    )
    pi = tuple(hull[1:])

    delta = []
    delta_left = []
    delta_right = []
    violated = []
    for a, b in zip(hull, hull[1:]):
        delta.append(1 if bool(coincide[a : b + 1].all()) else 0)
        delta_left.append(1 if bool(coincide[a + 1]) else 0)
        delta_right.append(1 if bool(coincide[b - 1]) else 0)
        violated.append(
            any(coincide[i - 1] and coincide[i] for i in range(a + 1, b + 1))
        )
    restricted = all(d == 1 or not v for d, v in zip(delta, violated))

    return EffectiveProfile(
        eff_lambdas=eff_lambdas,
        eff_sigmas=eff_sigmas,
        delta=tuple(delta),
        delta_left=tuple(delta_left),
        delta_right=tuple(delta_right),
        pi=pi,
        coincidence_points=tuple(float(xs[i]) for i in range(M + 1) if coincide[i]),
        restricted=restricted,
    )


def check_restriction(eff: EffectiveProfile) -> bool:
    """True iff coincidence with the envelope is all-or-nothing per segment."""
    return eff.restricted


def _as_time(value: float, rounding: bool) -> int:
    k = round(value)
    if abs(value - k) <= _TIME_EPS * max(1.0, abs(value)):
        return int(k)
    if rounding:
        return int(math.floor(value))
    raise NonIntegralTime(f"{value!r} is not an integer time; pass rounding=True")


def effective_times(eff: EffectiveProfile, n: int, rounding: bool = False) -> tuple:
    """Integer times (0, t^1, ..., t^m = n) with t^j the j-th scale times n.

    Strict mode (default) demands every product be an integer; with
    ``rounding`` the floor is taken instead.
    """
    if n < 1:
        raise ProfileError("n must be a positive integer")
    times = [0]
    for lam in eff.eff_lambdas:
        times.append(_as_time(lam * n, rounding))
    for a, b in zip(times, times[1:]):
        if not b > a:
            raise ProfileError(f"degenerate effective times {times} at n={n}")
    return tuple(times)


def raw_times(profile: VarianceProfile, n: int, rounding: bool = False) -> tuple:
    """Integer times (0, t_1, ..., t_M = n) of the raw scale parameters."""
    if n < 1:
        raise ProfileError("n must be a positive integer")
    times = [0]
    for lam in profile.lambdas:
        times.append(_as_time(lam * n, rounding))
    for a, b in zip(times, times[1:]):
        if not b > a:
            raise ProfileError(f"degenerate raw times {times} at n={n}")
    return tuple(times)


def step_sigmas(profile: VarianceProfile, n: int, rounding: bool = False) -> np.ndarray:
    """Standard deviation of each walk step k = 1..n, from integer boundaries."""
    times = raw_times(profile, n, rounding)
    out = np.empty(n)
    for i, s in enumerate(profile.sigmas):
        out[times[i] : times[i + 1]] = s
    return out


def index_sets(eff: EffectiveProfile, n: int, l: int):
    """Coinciding-segment indices up to l, and the times needing barrier control.

    Returns (A_l, T_l): A_l is the set of segment indices j <= l with
    delta_j = 1; T_l contains the effective times t^1..t^l together with all
    integer times inside the segments listed in A_l.
    """
    if not (1 <= l <= eff.m):
        raise ProfileError(f"l must be in 1..{eff.m}, got {l}")
    times = effective_times(eff, n)
    a_set = {j for j in range(1, l + 1) if eff.delta[j - 1] == 1}
    t_set = set(times[1 : l + 1])
    for j in a_set:
        t_set.update(range(times[j - 1], times[j] + 1))
    return a_set, t_set


def theta_index(eff: EffectiveProfile, n: int, k: int) -> int:
    """The segment index j with t^{j-1} < k <= t^j."""
    if not (1 <= k <= n):
        raise ProfileError(f"k must be in 1..{n}, got {k}")
    times = effective_times(eff, n)
    for j in range(1, eff.m + 1):
        if times[j - 1] < k <= times[j]:
            return j
    raise ProfileError(f"no segment contains k={k}")  # unreachable
