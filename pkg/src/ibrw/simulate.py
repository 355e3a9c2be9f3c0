"""Exact level-by-level simulation of the branching random walk.

Particles at level k are numbered 0..b^k-1; the base-b digits of a particle
index are its child choices from the root, so the ancestor at level k' is the
index with the last k-k' digits dropped and the branching time of two leaves
is the length of their common digit prefix.  Edge increments come from the
counter-based generator in :mod:`ibrw.rng`, which makes every trial
reproducible and every lineage regenerable without storing the tree.
"""

from __future__ import annotations

import math
import os
from concurrent.futures import ThreadPoolExecutor
from dataclasses import dataclass, field

import numpy as np

from . import rng
from .prediction import predict_max
from .profile import VarianceProfile, ProfileError, concave_hull, step_sigmas

DEFAULT_CAP = 1 << 26
CAP_ENV_VAR = "IBRW_CAP"


class CapacityExceeded(RuntimeError):
    """The requested population would exceed the configured particle cap."""


def _resolve_cap(explicit) -> int:
    if explicit is not None:
        return int(explicit)
    env = os.environ.get(CAP_ENV_VAR)
    if env:
        return int(env)
    return DEFAULT_CAP


@dataclass(frozen=True)
class BrwConfig:
    """Simulation parameters: profile, horizon, branching factor, seeding."""

    profile: VarianceProfile
    n: int
    branching: int = 2
    seed: int = 0
    trials: int = 1
    cap: int = None

    def __post_init__(self):
        if self.n < 0:
            raise ProfileError("n must be >= 0")
        if self.branching < 2:
            raise ProfileError("branching factor must be >= 2")
        if self.trials < 1:
            raise ProfileError("trials must be >= 1")
        if self.seed < 0:
            raise ProfileError("seed must be a non-negative 64-bit integer")
        cap = _resolve_cap(self.cap)
        object.__setattr__(self, "cap", cap)
        if self.branching ** self.n > cap:
            raise CapacityExceeded(
                f"{self.branching}^{self.n} particles exceed cap {cap}; "
                f"override via {CAP_ENV_VAR} or the cap field"
            )
        if self.n > 0:
            step_sigmas(self.profile, self.n)  # validates integer scale times

    def step_sigma_array(self) -> np.ndarray:
        if self.n == 0:
            return np.empty(0)
        return step_sigmas(self.profile, self.n)


@dataclass(frozen=True)
class PopulationState:
    """All particle values at one level of one trial."""

    level: int
    values: np.ndarray
    seed: int
    trial: int

    def __post_init__(self):
        if self.level == 0:
            if self.values.shape != (1,) or self.values[0] != 0.0:
                raise ProfileError("level 0 must hold the single origin value 0.0")


def initial_state(config: BrwConfig, trial: int) -> PopulationState:
    return PopulationState(
        level=0, values=np.zeros(1), seed=config.seed, trial=trial
    )


def step(state: PopulationState, config: BrwConfig) -> PopulationState:
    """Advance one level: each particle spawns b children.

    Children copy the parent value and add an independent Gaussian increment
    whose standard deviation is the profile value of the new step; the
    increment of child index i at level k+1 is keyed by
    (seed, trial, k+1, i).
    """
    b = config.branching
    k1 = state.level + 1
    if k1 > config.n:
        raise ProfileError(f"cannot step past the horizon n={config.n}")
    count = b ** k1
    if count > config.cap:
        raise CapacityExceeded(f"{b}^{k1} particles exceed cap {config.cap}")
    sigma = config.step_sigma_array()[k1 - 1]
    z = rng.normal_fill(state.seed, state.trial, k1, 0, count)
    values = np.repeat(state.values, b) + sigma * z
    return PopulationState(level=k1, values=values, seed=state.seed, trial=state.trial)


@dataclass(frozen=True)
class MaxSample:
    """Maximum of one trial with the ancestor-path values of the maximizer."""

    max_value: float
    argmax_index: int
    lineage: np.ndarray
    seed: int
    trial: int


def _ancestor_indices(leaf: int, n: int, b: int) -> np.ndarray:
    """Ancestor index of ``leaf`` at levels 1..n (digit truncation)."""
    out = np.empty(n, dtype=np.uint64)
    v = leaf
    for k in range(n, 0, -1):
        out[k - 1] = v
        v //= b
    return out


def lineage_values(config: BrwConfig, trial: int, leaf: int) -> np.ndarray:
    """Regenerate the walk S_v(0..n) along the ancestor path of one leaf."""
    n = config.n
    if not (0 <= leaf < config.branching ** n):
        raise ProfileError(f"leaf {leaf} out of range for n={n}")
    out = np.zeros(n + 1)
    if n == 0:
        return out
    anc = _ancestor_indices(leaf, n, config.branching)
    levels = np.arange(1, n + 1, dtype=np.uint64)
    z = rng.normal_at(config.seed, trial, levels, anc)
    np.cumsum(config.step_sigma_array() * z, out=out[1:])
    return out


def run_max(config: BrwConfig, trial: int) -> MaxSample:
    """Simulate one trial and extract the maximum, its index and lineage."""
    state = initial_state(config, trial)
    for _ in range(config.n):
        state = step(state, config)
    am = int(np.argmax(state.values))
    lineage = lineage_values(config, trial, am)
    return MaxSample(
        max_value=float(state.values[am]),
        argmax_index=am,
        lineage=lineage,
        seed=config.seed,
        trial=trial,
    )


def branching_time(u: int, v: int, n: int, b: int = 2) -> int:
    """Last level at which leaves u and v share an ancestor."""
    if not (0 <= u < b ** n and 0 <= v < b ** n):
        raise ProfileError("leaf indices out of range")
    k = n
    while u != v:
        u //= b
        v //= b
        k -= 1
    return k


@dataclass(frozen=True)
class McSummary:
    """Order statistics of the maxima over independent trials."""

    n: int
    trials: int
    prediction: float
    max_values: np.ndarray = field(repr=False)
    recentered: np.ndarray = field(repr=False)
    median: float
    mean: float
    q05: float
    q25: float
    q75: float
    q95: float

    def to_dict(self) -> dict:
        return {
            "n": self.n,
            "trials": self.trials,
            "prediction": self.prediction,
            "median": self.median,
            "mean": self.mean,
            "q05": self.q05,
            "q25": self.q25,
            "q75": self.q75,
            "q95": self.q95,
        }


def monte_carlo_max(config: BrwConfig, threads: int = None) -> McSummary:
    """Run ``config.trials`` independent replicas and summarize the maxima.

    Deterministic for a given config: the trial index keys the generator, so
    results do not depend on execution order or thread count.
    """
    eff = concave_hull(config.profile)
    prediction = predict_max(
        eff, config.n, mode="unrestricted", branching=config.branching
    ).second_order_total if config.n > 0 else 0.0

    def one(trial: int) -> float:
        return run_max(config, trial).max_value

    if threads is not None and threads > 1:
        with ThreadPoolExecutor(max_workers=threads) as pool:
            max_values = np.fromiter(
                pool.map(one, range(config.trials)), dtype=float, count=config.trials
            )
    else:
        max_values = np.fromiter(
            (one(t) for t in range(config.trials)), dtype=float, count=config.trials
        )
    recentered = max_values - prediction
    q05, q25, med, q75, q95 = np.quantile(max_values, [0.05, 0.25, 0.5, 0.75, 0.95])
    return McSummary(
        n=config.n,
        trials=config.trials,
        prediction=prediction,
        max_values=max_values,
        recentered=recentered,
        median=float(med),
        mean=float(max_values.mean()),
        q05=float(q05),
        q25=float(q25),
        q75=float(q75),
        q95=float(q95),
    )


def count_above_path(
    config: BrwConfig,
    trial: int,
    window,
    path_coeffs,
    tube_halfwidths,
    chunk: int = 1 << 15,
) -> int:
    """Count leaves ending in ``window`` whose whole trajectory stays in a tube.

    The tube around leaf value x at time 0 < k < n is
    path_coeffs[k] * x +- tube_halfwidths[k].  Two passes: a forward sweep
    holding one level at a time finds the candidate leaves inside the window,
    then each candidate's trajectory is regenerated and checked.
    """
    n = config.n
    lo, hi = float(window[0]), float(window[1])
    coeffs = np.asarray(path_coeffs, dtype=float)
    widths = np.asarray(tube_halfwidths, dtype=float)
    if coeffs.shape != (n + 1,) or widths.shape != (n + 1,):
        raise ProfileError("path_coeffs and tube_halfwidths must have length n+1")

    state = initial_state(config, trial)
    for _ in range(n):
        state = step(state, config)
    values = state.values
    cand = np.nonzero((values >= lo) & (values <= hi))[0]
    if cand.size == 0 or n <= 1:
        return int(cand.size)

    sig = config.step_sigma_array()
    levels = np.arange(1, n, dtype=np.uint64)  # interior times 1..n-1 suffice
    count = 0
    for start in range(0, cand.size, chunk):
        idx = cand[start : start + chunk]
        leaf_vals = values[idx]
        anc = idx[:, None].astype(np.uint64)
        shift = np.array(
            [config.branching ** (n - k) for k in range(1, n)], dtype=np.uint64
        )
        anc = anc // shift[None, :]
        z = rng.normal_at(config.seed, trial, levels[None, :], anc)
        paths = np.cumsum(sig[: n - 1] * z, axis=1)
        centers = coeffs[1:n][None, :] * leaf_vals[:, None]
        ok = np.all(np.abs(paths - centers) <= widths[1:n][None, :], axis=1)
        count += int(ok.sum())
    return count
