"""Extremal predictions: optimal path, logarithmic barrier, maximum level.

All logarithms are natural.  The growth constant for branching factor b is
sqrt(2 ln b); with the default b = 2 this normalizes the Gaussian tails
against the 2^k population growth.
"""

from __future__ import annotations

import math
from dataclasses import dataclass

from .profile import (
    EffectiveProfile,
    ProfileError,
    effective_times,
    theta_index,
)


class RestrictionViolated(ValueError):
    """Restricted-mode prediction requested on a profile that is not restricted."""


class BarrierUndefined(ValueError):
    """The logarithmic barrier is only defined on the controlled time set."""


def growth_rate(branching: int = 2) -> float:
    """sqrt(2 ln b), the per-unit-time growth constant of the maximum."""
    if branching < 2:
        raise ValueError("branching factor must be >= 2")
    return math.sqrt(2.0 * math.log(branching))


@dataclass(frozen=True)
class SegmentTerm:
    """One effective segment's contribution to the second-order prediction.

    ``delta_weight`` is the weight multiplying the extra log correction:
    2*delta_j in restricted mode, delta_left + delta_right otherwise.
    """

    j: int
    dt: int
    sigma_bar: float
    delta_weight: int
    first_order: float
    log_correction: float

    @property
    def contribution(self) -> float:
        return self.first_order + self.log_correction


@dataclass(frozen=True)
class PredictionReport:
    n: int
    g: float
    mode: str
    first_order: float
    log_correction: float
    second_order_total: float
    per_segment: tuple

    def to_dict(self) -> dict:
        return {
            "n": self.n,
            "g": self.g,
            "mode": self.mode,
            "first_order": self.first_order,
            "log_correction": self.log_correction,
            "second_order_total": self.second_order_total,
            "per_segment": [
                {
                    "j": t.j,
                    "dt": t.dt,
                    "sigma_bar": t.sigma_bar,
                    "delta_weight": t.delta_weight,
                    "first_order": t.first_order,
                    "log_correction": t.log_correction,
                    "contribution": t.contribution,
                }
                for t in self.per_segment
            ],
        }


def _segment_terms(eff: EffectiveProfile, n: int, weights, branching: int):
    g = growth_rate(branching)
    times = effective_times(eff, n)
    terms = []
    for j in range(1, eff.m + 1):
        dt = times[j] - times[j - 1]
        sb = eff.eff_sigmas[j - 1]
        w = weights[j - 1]
        fo = g * sb * dt
        lc = -(1.0 + w) * sb / (2.0 * g) * math.log(dt)
        terms.append(
            SegmentTerm(
                j=j,
                dt=dt,
                sigma_bar=sb,
                delta_weight=w,
                first_order=fo,
                log_correction=lc,
            )
        )
    return terms


def predict_max(
    eff: EffectiveProfile,
    n: int,
    mode: str = "restricted",
    branching: int = 2,
) -> PredictionReport:
    """Second-order prediction for the maximum at time n.

    Per segment the prediction adds g*sigma_bar*dt minus a log correction
    whose coefficient is (1 + 2*delta_j)/(2g)*sigma_bar in restricted mode
    and (1 + delta_left + delta_right)/(2g)*sigma_bar otherwise.  The two
    modes agree whenever the profile is restricted.
    """
    if mode not in ("restricted", "unrestricted"):
        raise ValueError(f"unknown mode {mode!r}")
    if mode == "restricted" and not eff.restricted:
        raise RestrictionViolated(
            "profile coincides with its envelope on a proper sub-interval; "
            "use unrestricted mode"
        )
    if mode == "restricted":
        weights = [2 * d for d in eff.delta]
    else:
        weights = [dl + dr for dl, dr in zip(eff.delta_left, eff.delta_right)]
    terms = _segment_terms(eff, n, weights, branching)
    fo = sum(t.first_order for t in terms)
    lc = sum(t.log_correction for t in terms)
    return PredictionReport(
        n=n,
        g=growth_rate(branching),
        mode=mode,
        first_order=fo,
        log_correction=lc,
        second_order_total=fo + lc,
        per_segment=tuple(terms),
    )


def first_order(eff: EffectiveProfile, n: int, branching: int = 2) -> float:
    """Leading-order level of the maximum, g * sum sigma_bar_j * dt_j."""
    if n == 0:
        return 0.0
    g = growth_rate(branching)
    times = effective_times(eff, n)
    return g * sum(
        sb * (times[j] - times[j - 1])
        for j, sb in enumerate(eff.eff_sigmas, start=1)
    )


def optimal_path(eff: EffectiveProfile, n: int, k: int, branching: int = 2) -> float:
    """Level the leading particle tracks at time k: affine per segment,
    meeting the per-segment second-order contributions at segment endpoints.
    """
    if not (0 <= k <= n):
        raise ProfileError(f"k must be in 0..{n}, got {k}")
    if k == 0:
        return 0.0
    weights = [2 * d for d in eff.delta]
    terms = _segment_terms(eff, n, weights, branching)
    times = effective_times(eff, n)
    theta = theta_index(eff, n, k)
    total = 0.0
    for t in terms[:theta]:
        frac = (min(k, times[t.j]) - times[t.j - 1]) / t.dt
        total += frac * t.contribution
    return total


def barrier(eff: EffectiveProfile, n: int, k: int, branching: int = 2) -> float:
    """Logarithmic barrier at time k.

    Zero at every effective time; inside a fully coinciding segment the
    barrier is (5/2)(sigma_bar/g) times the log-distance to the nearer
    segment endpoint.  Undefined elsewhere.
    """
    times = effective_times(eff, n)
    if k in times:
        return 0.0
    if not (0 <= k <= n):
        raise BarrierUndefined(f"k={k} outside 0..{n}")
    theta = theta_index(eff, n, k)
    if eff.delta[theta - 1] != 1:
        raise BarrierUndefined(
            f"k={k} lies in segment {theta}, which has no barrier control"
        )
    g = growth_rate(branching)
    sb = eff.eff_sigmas[theta - 1]
    lo, hi = times[theta - 1], times[theta]
    if k <= (lo + hi) / 2.0:
        return 2.5 * sb / g * math.log(k - lo)
    return 2.5 * sb / g * math.log(hi - k)
