"""Geometric and probabilistic primitives of the network model.

The typical user sits at the origin.  A BS at distance ``u`` and an RIS at
distance ``t`` subtend the angle ``psi`` at the user.
"""
from __future__ import annotations

from dataclasses import dataclass

import numpy as np


@dataclass(frozen=True)
class PolarPoint:
    r: float
    phi: float

    def __post_init__(self):
        if not np.isfinite(self.r) or self.r < 0:
            raise ValueError("r must be finite and nonnegative")
        if not 0 <= self.phi < 2 * np.pi:
            raise ValueError("phi must lie in [0, 2*pi)")

    def to_xy(self):
        return self.r * np.cos(self.phi), self.r * np.sin(self.phi)


def los_probability(r, eta):
    """Probability that a link of length `r` is unobstructed."""
    return np.exp(-eta * np.asarray(r, dtype=float))


def bs_ris_distance(u, t, psi):
    u = np.asarray(u, dtype=float)
    t = np.asarray(t, dtype=float)
    sq = u * u + t * t - 2.0 * u * t * np.cos(psi)
    return np.sqrt(np.maximum(sq, 0.0))


def reflected_distance(u, t, psi):
    """Length of the BS -> RIS -> user path (user-RIS leg plus RIS-BS leg)."""
    return np.asarray(t, dtype=float) + bs_ris_distance(u, t, psi)


def feasibility_probability(r_bu, r_ru, psi):
    """Probability that a uniformly oriented RIS has both the BS and the user
    on its reflective side.

    The angle at the RIS between the user and the BS is ``theta`` and the
    probability is ``(pi - theta) / (2 pi)``.  When the BS coincides with the
    RIS the value is taken as 1/2 by continuity.
    """
    r_bu = np.asarray(r_bu, dtype=float)
    r_ru = np.asarray(r_ru, dtype=float)
    d = bs_ris_distance(r_bu, r_ru, psi)
    num = r_ru - r_bu * np.cos(psi)
    with np.errstate(invalid="ignore", divide="ignore"):
        arg = np.where(d > 0, num / np.where(d > 0, d, 1.0), 1.0)
    arg = np.clip(arg, -1.0, 1.0)
    out = 0.5 * (1.0 - np.arccos(arg) / np.pi)
    return out[()] if out.ndim == 0 else out


def sample_disc_arrays(lam: float, radius: float, rng: np.random.Generator):
    """Homogeneous PPP on a disc as arrays ``(r, phi)``."""
    n = rng.poisson(lam * np.pi * radius * radius) if lam > 0 else 0
    r = radius * np.sqrt(rng.random(n))
    phi = 2.0 * np.pi * rng.random(n)
    return r, phi


def sample_ppp_disc(lam: float, radius: float, rng: np.random.Generator) -> list[PolarPoint]:
    if lam < 0 or radius <= 0:
        raise ValueError("need lam >= 0 and radius > 0")
    r, phi = sample_disc_arrays(lam, radius, rng)
    return [PolarPoint(float(a), float(b)) for a, b in zip(r, phi)]
