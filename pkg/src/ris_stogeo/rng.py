"""Counter-based random numbers keyed by (master seed, trial, stream, index).

Every uniform is a pure function of its coordinates, so a trial can be
replayed in isolation and the compiled kernel can reproduce the numpy
reference draw for draw.  The mixer is the SplitMix64 finalizer.
"""
from __future__ import annotations

import numpy as np

GOLDEN = np.uint64(0x9E3779B97F4A7C15)
SEED_SALT = np.uint64(0x5851F42D4C957F2D)
_M1 = np.uint64(0xBF58476D1CE4E5B9)
_M2 = np.uint64(0x94D049BB133111EB)
_TWO52 = 2.0 ** -52

MASK64 = (1 << 64) - 1


def mix64(z):
    z = np.asarray(z, dtype=np.uint64)
    # wrap-around multiplication is intended
    with np.errstate(over="ignore"):
        z = (z ^ (z >> np.uint64(30))) * _M1
        z = (z ^ (z >> np.uint64(27))) * _M2
    return z ^ (z >> np.uint64(31))


def seed_key(seed: int) -> np.uint64:
    return mix64(np.uint64(int(seed) & MASK64) ^ SEED_SALT)[()]


def trial_keys(seed: int, trials) -> np.ndarray:
    """Keys for an array of trial indices."""
    t = np.asarray(trials, dtype=np.uint64) + np.uint64(1)
    with np.errstate(over="ignore"):
        return mix64(seed_key(seed) + t * GOLDEN)


def trial_key(seed: int, trial: int) -> np.uint64:
    return trial_keys(seed, [trial])[0]


def _to_unit(x):
    return ((x >> np.uint64(12)).astype(np.float64) + 0.5) * _TWO52


def uniforms(key, stream: int, idx) -> np.ndarray:
    """Open-interval uniforms for positions `idx` of `stream` under `key`."""
    idx = np.asarray(idx, dtype=np.uint64)
    with np.errstate(over="ignore"):
        ctr = (np.uint64(stream) << np.uint64(48)) + idx + np.uint64(1)
        return _to_unit(mix64(np.uint64(key) + ctr * GOLDEN))


class TrialStream:
    """Random draws for one trial.  Streams are small integers, indices are
    positions within a stream; the same (stream, index) always gives the same
    value."""

    def __init__(self, key):
        self.key = np.uint64(key)

    @classmethod
    def for_trial(cls, seed: int, trial: int) -> "TrialStream":
        return cls(trial_key(seed, trial))

    def uniform(self, stream: int, idx):
        return uniforms(self.key, stream, idx)

    def uniform1(self, stream: int, idx: int = 0) -> float:
        return float(uniforms(self.key, stream, [idx])[0])

    def exponential(self, stream: int, idx):
        return -np.log(self.uniform(stream, idx))


def poisson_table(mean: float, extra: float = 20.0) -> np.ndarray:
    """CDF table for drawing Poisson counts by inversion.

    A uniform `u` maps to ``searchsorted(table, u, side='right')``, capped at
    the last index.
    """
    from scipy import stats

    if mean <= 0:
        return np.ones(1)
    kmax = int(mean + extra * np.sqrt(mean) + 50)
    return stats.poisson.cdf(np.arange(kmax + 1), mean)


def poisson_from_table(table: np.ndarray, u) -> np.ndarray:
    k = np.searchsorted(table, u, side="right")
    return np.minimum(k, len(table) - 1)


def poisson_inversion(u: float, mean: float) -> int:
    """Poisson variate by sequential inversion; used for small means."""
    k = 0
    p = np.exp(-mean)
    cdf = p
    while cdf < u:
        k += 1
        p *= mean / k
        if p == 0.0:
            break
        cdf += p
    return k
