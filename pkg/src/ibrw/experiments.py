"""Numerical experiments tying the simulator to the theory.

The lower-bound construction counts first-segment leaves that end in a unit
window at the predicted level and whose whole trajectory stays inside a
concave tube around the straight-line path to their endpoint; the two-moment
ratio of that count is the Paley-Zygmund lower bound on the probability of
reaching the window.  The construction requires the cumulative variance to
lie strictly below its envelope inside the first effective segment.
"""

from __future__ import annotations

import math
from dataclasses import dataclass

import numpy as np

from .prediction import optimal_path
from .profile import (
    EffectiveProfile,
    ProfileError,
    VarianceProfile,
    concave_hull,
    effective_times,
    integral_J,
    raw_times,
)
from .simulate import BrwConfig, count_above_path, monte_carlo_max

DEFAULT_TUBE_CONSTANT = 3.0


class AssumptionViolated(ValueError):
    """The cumulative variance touches its envelope inside the first segment."""


def first_segment_strictly_below(eff: EffectiveProfile) -> bool:
    """True iff the envelope is strictly above the cumulative variance on the
    open first effective segment (no full coincidence, no isolated touch)."""
    lam1 = eff.eff_lambdas[0]
    if eff.delta[0] == 1:
        return False
    return not any(0.0 < p < lam1 for p in eff.coincidence_points)


@dataclass(frozen=True)
class LowerBoundSetup:
    """Inputs of the first-segment counting experiment.

    ``t1`` is the first effective time; ``window`` is the unit interval
    starting at the optimal level for time t1; ``cf`` scales the tube.
    """

    profile: VarianceProfile
    n: int
    t1: int
    cf: float
    window: tuple

    def __post_init__(self):
        if not self.cf > 0:
            raise ProfileError("cf must be > 0")


def make_lower_bound_setup(
    profile: VarianceProfile,
    n: int,
    cf: float = DEFAULT_TUBE_CONSTANT,
    branching: int = 2,
) -> LowerBoundSetup:
    eff = concave_hull(profile)
    t1 = effective_times(eff, n)[1]
    level = optimal_path(eff, n, t1, branching=branching)
    return LowerBoundSetup(
        profile=profile, n=n, t1=t1, cf=cf, window=(level, level + 1.0)
    )


def optimal_subpath(setup: LowerBoundSetup, k: int, x: float) -> float:
    """Straight-line (in cumulative variance) path to x: ratio of cumulative
    variances times the endpoint value."""
    if not (0 <= k <= setup.t1):
        raise ProfileError(f"k must be in 0..{setup.t1}, got {k}")
    lam1 = setup.t1 / setup.n
    return integral_J(setup.profile, 0.0, k / setup.n) / integral_J(
        setup.profile, 0.0, lam1
    ) * x


def tube_halfwidth(setup: LowerBoundSetup, k: int) -> float:
    """Concave tube halfwidth at time k (2/3 power of the cumulative variance
    from the nearer end, scaled by cf)."""
    if not (0 <= k <= setup.t1):
        raise ProfileError(f"k must be in 0..{setup.t1}, got {k}")
    t_raw1 = raw_times(setup.profile, setup.n)[1]
    lam1 = setup.t1 / setup.n
    if k <= t_raw1:
        mass = integral_J(setup.profile, 0.0, k / setup.n) * setup.n
    else:
        mass = integral_J(setup.profile, k / setup.n, lam1) * setup.n
    if mass == 0.0:
        return 0.0
    return setup.cf * mass ** (2.0 / 3.0)


@dataclass(frozen=True)
class SlopeRatios:
    """Chord-slope ratios of the cumulative variance on the first segment."""

    eta1: float
    eta2: float


def slope_ratios(profile: VarianceProfile, tol: float = 1e-9) -> SlopeRatios:
    """eta1 compares the initial slope to the first-segment average; eta2 is
    the smallest right-chord slope over the interior breakpoints, relative to
    the same average.  Strictly-below-envelope profiles give eta1 < 1 < eta2.
    """
    eff = concave_hull(profile, tol)
    if not first_segment_strictly_below(eff):
        raise AssumptionViolated(
            "cumulative variance meets its envelope inside the first segment"
        )
    lam1 = eff.eff_lambdas[0]
    avg = integral_J(profile, 0.0, lam1) / lam1
    eta1 = (integral_J(profile, 0.0, profile.lambdas[0]) / profile.lambdas[0]) / avg
    interior = [x for x in profile.lambdas if 0.0 < x < lam1]
    eta2 = min(
        (integral_J(profile, x, lam1) / (lam1 - x)) / avg for x in interior
    )
    return SlopeRatios(eta1=eta1, eta2=eta2)


def first_segment_config(
    setup: LowerBoundSetup, seed: int, trials: int, branching: int = 2
) -> BrwConfig:
    """The first t1 steps viewed as a complete walk on rescaled time [0, 1]."""
    lam1 = setup.t1 / setup.n
    last = [
        i
        for i, x in enumerate(setup.profile.lambdas)
        if abs(x - lam1) <= 1e-12
    ]
    if not last:
        raise ProfileError(f"t1={setup.t1} is not a raw scale time of the profile")
    keep = [i for i, x in enumerate(setup.profile.lambdas) if x < lam1 - 1e-12]
    keep.append(last[0])
    sigmas = tuple(setup.profile.sigmas[i] for i in keep)
    lambdas = tuple(setup.profile.lambdas[i] / lam1 for i in keep)
    sub = VarianceProfile(sigmas=sigmas, lambdas=lambdas)
    return BrwConfig(
        profile=sub, n=setup.t1, branching=branching, seed=seed, trials=trials
    )


@dataclass(frozen=True)
class PaleyZygmundResult:
    mean_count: float
    mean_square: float
    ratio: float
    degenerate: bool
    trials: int


def paley_zygmund_ratio(
    setup: LowerBoundSetup, trials: int, rng, branching: int = 2
) -> PaleyZygmundResult:
    """Estimate the first two moments of the confined count and their
    Paley-Zygmund ratio (mean squared over mean square); a count that never
    fires is reported as ratio 0 with the degenerate flag set."""
    if trials < 1:
        raise ProfileError("trials must be >= 1")
    config = first_segment_config(setup, seed=rng, trials=trials, branching=branching)
    coeffs = np.array(
        [optimal_subpath(setup, k, 1.0) for k in range(setup.t1 + 1)]
    )
    widths = np.array([tube_halfwidth(setup, k) for k in range(setup.t1 + 1)])
    total = 0.0
    total_sq = 0.0
    for trial in range(trials):
        c = count_above_path(config, trial, setup.window, coeffs, widths)
        total += c
        total_sq += c * c
    mean = total / trials
    mean_sq = total_sq / trials
    if mean_sq == 0.0:
        return PaleyZygmundResult(0.0, 0.0, 0.0, True, trials)
    return PaleyZygmundResult(mean, mean_sq, mean * mean / mean_sq, False, trials)


@dataclass(frozen=True)
class TightnessRow:
    n: int
    median_offset: float
    iqr: float


def tightness_study(configs, threads=None) -> tuple:
    """Recentered median and interquartile range of the maximum per horizon."""
    rows = []
    for config in configs:
        summary = monte_carlo_max(config, threads=threads)
        rows.append(
            TightnessRow(
                n=config.n,
                median_offset=summary.median - summary.prediction,
                iqr=summary.q75 - summary.q25,
            )
        )
    return tuple(rows)
