"""Path loss, fading and sectored beam gains."""
from __future__ import annotations

from dataclasses import dataclass

import numpy as np
from scipy import special

from .params import DerivedParams


@dataclass(frozen=True)
class BeamParams:
    theta: float   # beamwidth, rad
    n: float       # main-lobe gain
    sigma2: float  # alignment-error variance, rad^2

    def __post_init__(self):
        if not 0 < self.theta <= 2 * np.pi:
            raise ValueError("beamwidth must lie in (0, 2*pi]")
        if abs(self.n * self.theta - 2 * np.pi) > 1e-9 * 2 * np.pi:
            raise ValueError("gain times beamwidth must equal 2*pi")
        if not self.sigma2 > 0:
            raise ValueError("sigma2 must be positive")

    @classmethod
    def from_width(cls, theta: float, sigma2: float) -> "BeamParams":
        return cls(theta, 2 * np.pi / theta, sigma2)


def beam_params(dp: DerivedParams) -> tuple[BeamParams, BeamParams]:
    """(BS side, user side) beam parameters."""
    return (BeamParams(dp.theta_b, dp.n_b, dp.sigma_b2),
            BeamParams(dp.theta_u, dp.n_u, dp.sigma_u2))


def path_loss_direct(r, alpha):
    r = np.asarray(r, dtype=float)
    if np.any(r <= 0):
        raise ValueError("path loss is singular at zero distance")
    return r ** -alpha


def path_loss_reflected(d_sum, alpha, gamma):
    return gamma * path_loss_direct(d_sum, alpha)


def alignment_probability(sigma2, theta):
    """Chance that a truncated-Gaussian pointing error stays within half a beam."""
    s = np.sqrt(2.0 * np.asarray(sigma2, dtype=float))
    return special.erf(theta / (2.0 * s)) / special.erf(np.pi / s)


def serving_gain_probability(bp_b: BeamParams, bp_u: BeamParams) -> float:
    return float(alignment_probability(bp_b.sigma2, bp_b.theta)
                 * alignment_probability(bp_u.sigma2, bp_u.theta))


def interferer_gain_probability(bp_b: BeamParams, bp_u: BeamParams) -> float:
    # an interfering beam points in a uniformly random direction on both ends
    return bp_b.theta * bp_u.theta / (4 * np.pi ** 2)


def sample_serving_gain(bp_b: BeamParams, bp_u: BeamParams, rng: np.random.Generator, size=None):
    hit = rng.random(size) < serving_gain_probability(bp_b, bp_u)
    return np.where(hit, bp_b.n * bp_u.n, 0.0)


def sample_interferer_gain(bp_b: BeamParams, bp_u: BeamParams, rng: np.random.Generator, size=None):
    hit = rng.random(size) < interferer_gain_probability(bp_b, bp_u)
    return np.where(hit, bp_b.n * bp_u.n, 0.0)


def sample_fading(rng: np.random.Generator, size=None):
    """Rayleigh power fading, unit-mean exponential."""
    return rng.exponential(1.0, size)
