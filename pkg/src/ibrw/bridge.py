"""Discrete Brownian bridges and Monte Carlo barrier estimates.

``sample_bridge`` builds a bridge from a plain Gaussian walk by subtracting
the linear interpolant of its endpoints, which pins both ends to zero and
leaves the bridge independent of the total increment.  The survival
estimators run vectorized batches with early elimination: a trial leaves the
batch as soon as it crosses its barrier, so the expected work per trial grows
like the square root of the horizon rather than linearly.

Bridges inside ``bridge_barrier_survival`` are generated by the exact
conditional recursion (pinned at the right endpoint): stepping from time k-1
to k on an interval with L-k+1 steps remaining multiplies the current value
by (L-k)/(L-k+1) and adds independent noise of variance sigma^2 (L-k)/(L-k+1),
which reproduces the bridge covariance exactly while allowing early exits.
"""

from __future__ import annotations

import math
from concurrent.futures import ThreadPoolExecutor
from dataclasses import dataclass

import numpy as np

_BATCH = 1 << 16
_CONF_Z = 1.959963984540054  # two-sided 95%


class BridgeError(ValueError):
    """Invalid bridge or barrier parameters."""


@dataclass(frozen=True)
class BridgeSpec:
    """A bridge pinned to zero at integer times ``start`` and ``end``."""

    start: int
    end: int
    sigma: float

    def __post_init__(self):
        if not self.start < self.end:
            raise BridgeError("need start < end")
        if not self.sigma > 0:
            raise BridgeError("sigma must be > 0")

    @property
    def length(self) -> int:
        return self.end - self.start


@dataclass(frozen=True)
class LogBarrier:
    """Symmetric logarithmic barrier D*log(distance to the nearer endpoint)."""

    D: float
    z: float
    interval: tuple

    def __post_init__(self):
        if not self.D > 0:
            raise BridgeError("D must be > 0")
        if not self.z > 0:
            raise BridgeError("z must be > 0")


@dataclass(frozen=True)
class EstimateSample:
    """A Monte Carlo probability estimate with a 95% binomial interval."""

    hits: int
    trials: int
    p_hat: float
    ci_low: float
    ci_high: float


def _wilson(hits: int, trials: int) -> EstimateSample:
    p = hits / trials
    z2 = _CONF_Z * _CONF_Z
    denom = 1.0 + z2 / trials
    center = (p + z2 / (2 * trials)) / denom
    half = (
        _CONF_Z
        * math.sqrt(p * (1.0 - p) / trials + z2 / (4.0 * trials * trials))
        / denom
    )
    return EstimateSample(
        hits=hits,
        trials=trials,
        p_hat=p,
        ci_low=max(0.0, center - half),
        ci_high=min(1.0, center + half),
    )


def _generators(seed: int, trials: int):
    """Deterministic per-batch generators partitioning the trial space."""
    n_batches = (trials + _BATCH - 1) // _BATCH
    children = np.random.SeedSequence(seed).spawn(n_batches)
    sizes = [_BATCH] * (n_batches - 1) + [trials - _BATCH * (n_batches - 1)]
    return [
        (np.random.Generator(np.random.PCG64(c)), s)
        for c, s in zip(children, sizes)
    ]


def _run_batches(worker, seed: int, trials: int, threads=None) -> int:
    batches = _generators(seed, trials)
    if threads is not None and threads > 1:
        with ThreadPoolExecutor(max_workers=threads) as pool:
            return sum(pool.map(lambda gs: worker(*gs), batches))
    return sum(worker(g, s) for g, s in batches)


def sample_bridge(spec: BridgeSpec, rng) -> np.ndarray:
    """One bridge path B_start..B_end, built as walk minus linear interpolant.

    Both endpoints are exactly zero.
    """
    gen = rng if isinstance(rng, np.random.Generator) else np.random.default_rng(rng)
    L = spec.length
    steps = gen.normal(0.0, spec.sigma, size=L)
    walk = np.concatenate([[0.0], np.cumsum(steps)])
    ramp = np.arange(L + 1) / L
    return walk - ramp * walk[-1]


def bridge_covariance(spec: BridgeSpec, k: int, k2: int) -> float:
    """Closed-form Cov(B_k, B_k2) of the pinned bridge."""
    if not (spec.start <= k <= spec.end and spec.start <= k2 <= spec.end):
        raise BridgeError("indices outside the bridge interval")
    lo, hi = min(k, k2), max(k, k2)
    return (lo - spec.start) * (spec.end - hi) / spec.length * spec.sigma ** 2


def _log_barrier_values(L: int, D: float) -> np.ndarray:
    """Barrier at offsets 0..L: 0 at the ends, D*log to the nearer end inside."""
    b = np.zeros(L + 1)
    if L > 1:
        i = np.arange(1, L)
        b[1:L] = np.where(i <= L / 2, D * np.log(i), D * np.log(float(L) - i))
    return b


def bridge_barrier_survival(
    spec: BridgeSpec, barrier: LogBarrier, trials: int, rng, threads=None
) -> EstimateSample:
    """Probability that the bridge stays below barrier + z over the interval."""
    if trials < 1:
        raise BridgeError("trials must be >= 1")
    if tuple(barrier.interval) != (spec.start, spec.end):
        raise BridgeError("barrier interval does not match the bridge interval")
    L = spec.length
    bvals = _log_barrier_values(L, barrier.D) + barrier.z
    sigma = spec.sigma

    def worker(gen, size) -> int:
        if not 0.0 < barrier.z:
            return 0
        B = np.zeros(size)
        for k in range(1, L + 1):
            frac = (L - k) / (L - k + 1)
            B = B * frac + gen.normal(0.0, sigma * math.sqrt(frac), size=B.size)
            B = B[B < bvals[k]]
            if B.size == 0:
                return 0
        return B.size

    hits = _run_batches(worker, rng, trials, threads)
    return _wilson(hits, trials)


def walk_barrier_survival(
    sigma: float, D: float, z: float, t: int, trials: int, rng, threads=None
) -> EstimateSample:
    """Probability that a Gaussian walk stays strictly below D*log(k) + z.

    The barrier value at k = 0 is 0, so the event requires z > 0.
    """
    if t < 1 or trials < 1:
        raise BridgeError("t and trials must be >= 1")
    bvals = np.zeros(t + 1)
    if D != 0.0:
        bvals[1:] = D * np.log(np.arange(1, t + 1))
    bvals += z

    def worker(gen, size) -> int:
        if not 0.0 < z:
            return 0
        S = np.zeros(size)
        for k in range(1, t + 1):
            S = S + gen.normal(0.0, sigma, size=S.size)
            S = S[S < bvals[k]]
            if S.size == 0:
                return 0
        return S.size

    hits = _run_batches(worker, rng, trials, threads)
    return _wilson(hits, trials)


def gambler_ruin_survival(
    sigma: float, z: float, t: int, trials: int, rng, threads=None
) -> EstimateSample:
    """Probability that the running maximum of a Gaussian walk stays below z."""
    if t < 1 or trials < 1:
        raise BridgeError("t and trials must be >= 1")

    def worker(gen, size) -> int:
        if not 0.0 < z:
            return 0
        S = np.zeros(size)
        for k in range(1, t + 1):
            S = S + gen.normal(0.0, sigma, size=S.size)
            S = S[S < z]
            if S.size == 0:
                return 0
        return S.size

    hits = _run_batches(worker, rng, trials, threads)
    return _wilson(hits, trials)


def first_passage_window(
    sigma: float, x: float, j: int, trials: int, rng, threads=None
) -> EstimateSample:
    """Probability that a walk first reaches level x at step j with overshoot < 1."""
    if j < 1 or trials < 1:
        raise BridgeError("j and trials must be >= 1")

    def worker(gen, size) -> int:
        S = np.zeros(size)
        for k in range(1, j):
            S = S + gen.normal(0.0, sigma, size=S.size)
            S = S[S < x]  # survivors have not yet reached x
            if S.size == 0:
                return 0
        S = S + gen.normal(0.0, sigma, size=S.size)
        return int(((S >= x) & (S < x + 1.0)).sum())

    hits = _run_batches(worker, rng, trials, threads)
    return _wilson(hits, trials)
