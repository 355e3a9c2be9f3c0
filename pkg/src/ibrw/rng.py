"""Counter-based Gaussian noise for the branching random walk.

Every edge increment is a pure function of (seed, trial, level, node index),
so any single increment can be regenerated in O(1) - lineages are rebuilt
without storing the tree, and trials are order-independent.

Construction: a 64-bit stream key is derived from (seed, trial, level) by
iterated SplitMix64 finalizers; within a stream, word i is
mix(key + i * GOLDEN).  Node indices 2c and 2c+1 share counter c: its two
words give two uniforms, mapped to a pair of standard normals by the
Box-Muller transform (cos branch for even indices, sin for odd).
"""

from __future__ import annotations

import numpy as np

_MASK = (1 << 64) - 1
_GOLDEN = 0x9E3779B97F4A7C15
_MIX1 = 0xBF58476D1CE4E5B9
_MIX2 = 0x94D049BB133111EB

_U_GOLDEN = np.uint64(_GOLDEN)
_U_MIX1 = np.uint64(_MIX1)
_U_MIX2 = np.uint64(_MIX2)
_S30 = np.uint64(30)
_S27 = np.uint64(27)
_S31 = np.uint64(31)
_S11 = np.uint64(11)
_ONE = np.uint64(1)
_TWO = np.uint64(2)

_UNIT = 2.0 ** -53
_TWO_PI = 2.0 * np.pi

_CHUNK = 1 << 18


def _mix_int(x: int) -> int:
    x &= _MASK
    x ^= x >> 30
    x = (x * _MIX1) & _MASK
    x ^= x >> 27
    x = (x * _MIX2) & _MASK
    return x ^ (x >> 31)


def stream_key(seed: int, trial: int, level: int) -> int:
    """64-bit key of the noise stream attached to one tree level of one trial."""
    h = _mix_int(seed + _GOLDEN)
    h = _mix_int(h ^ ((trial + _MIX1) & _MASK))
    h = _mix_int(h ^ ((level + _MIX2) & _MASK))
    return h


def _mix_vec(x):
    x = (x ^ (x >> _S30)) * _U_MIX1
    x = (x ^ (x >> _S27)) * _U_MIX2
    return x ^ (x >> _S31)


def _pair(sk, counters):
    """Box-Muller pair (cos-word, sin-word) for an array of counters."""
    a = _mix_vec(sk + (_TWO * counters) * _U_GOLDEN)
    b = _mix_vec(sk + (_TWO * counters + _ONE) * _U_GOLDEN)
    u1 = ((a >> _S11) + _ONE) * _UNIT  # in (0, 1]
    u2 = (b >> _S11) * _UNIT           # in [0, 1)
    r = np.sqrt(-2.0 * np.log(u1))
    theta = _TWO_PI * u2
    return r * np.cos(theta), r * np.sin(theta)


def normal_fill(seed: int, trial: int, level: int, lo: int, hi: int) -> np.ndarray:
    """Standard normals for node indices lo..hi-1, chunked for cache locality."""
    sk = np.uint64(stream_key(seed, trial, level))
    out = np.empty(hi - lo)
    c0 = lo >> 1
    c1 = (hi + 1) >> 1
    for cl in range(c0, c1, _CHUNK):
        ch = min(cl + _CHUNK, c1)
        zc, zs = _pair(sk, np.arange(cl, ch, dtype=np.uint64))
        z = np.empty(2 * (ch - cl))
        z[0::2] = zc
        z[1::2] = zs
        blo = max(lo, 2 * cl)
        bhi = min(hi, 2 * ch)
        out[blo - lo : bhi - lo] = z[blo - 2 * cl : bhi - 2 * cl]
    return out


def normal_at(seed, trial, level, index) -> np.ndarray:
    """Standard normals at arbitrary node indices; broadcasts over arrays.

    Bit-identical to the corresponding entries of ``normal_fill``.
    """
    trial_a = np.asarray(trial, dtype=np.uint64)
    level_a = np.asarray(level, dtype=np.uint64)
    index_a = np.asarray(index, dtype=np.uint64)
    h = np.asarray(_mix_int(seed + _GOLDEN), dtype=np.uint64)
    h = _mix_vec(h ^ (trial_a + _U_MIX1))
    h = _mix_vec(h ^ (level_a + _U_MIX2))
    zc, zs = _pair(h, index_a >> _ONE)
    return np.where((index_a & _ONE) == 0, zc, zs)
