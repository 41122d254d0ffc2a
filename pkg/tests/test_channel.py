import math

import numpy as np
import pytest
from hypothesis import given, strategies as st
from scipy import special

from ris_stogeo.channel import (BeamParams, alignment_probability, beam_params,
                                interferer_gain_probability, path_loss_direct, path_loss_reflected,
                                sample_fading, sample_interferer_gain, sample_serving_gain,
                                serving_gain_probability)
from ris_stogeo.params import derive_params


def test_path_loss_examples():
    assert path_loss_direct(1.0, 4) == 1.0
    assert path_loss_direct(10.0, 4) == pytest.approx(1e-4)
    assert path_loss_direct(2.0, 4) == 0.0625
    assert path_loss_reflected(1.0, 4, 0.85) == 0.85
    assert path_loss_reflected(10.0, 4, 0.85) == pytest.approx(0.85e-4)
    assert path_loss_reflected(7.0, 3, 1.0) == path_loss_direct(7.0, 3)
    for f in (lambda: path_loss_direct(0.0, 4), lambda: path_loss_reflected(0.0, 4, 0.5)):
        with pytest.raises(ValueError):
            f()


def test_alignment_examples(cfg):
    assert alignment_probability(0.3, 2 * math.pi) == pytest.approx(1.0)
    assert alignment_probability(1e-8, 0.25) == pytest.approx(1.0, abs=1e-12)
    dp = derive_params(cfg)
    p = alignment_probability(dp.sigma_b2, dp.theta_b)
    s = math.sqrt(2 * dp.sigma_b2)
    assert p == pytest.approx(special.erf(0.25 / (2 * s)) / special.erf(math.pi / s))
    assert 0.25 / (2 * s) == pytest.approx(1.2710, abs=1e-4)
    assert p == pytest.approx(0.9277, abs=1e-4)


@given(s1=st.floats(1e-4, 50), s2=st.floats(1e-4, 50), th=st.floats(0.01, 6.0))
def test_alignment_monotone_in_variance(s1, s2, th):
    a, b = alignment_probability(min(s1, s2), th), alignment_probability(max(s1, s2), th)
    assert 0 < b <= a <= 1.0 + 1e-15


def test_beam_params_invariants(cfg):
    bb, bu = beam_params(derive_params(cfg))
    assert bb.n * bb.theta == pytest.approx(2 * math.pi)
    with pytest.raises(ValueError):
        BeamParams(0.25, 10.0, 0.1)
    with pytest.raises(ValueError):
        BeamParams.from_width(0.25, 0.0)
    assert interferer_gain_probability(bb, bu) == pytest.approx(0.25 / (4 * math.pi ** 2))
    assert interferer_gain_probability(bb, bu) == pytest.approx(6.333e-3, abs=1e-6)


def test_interferer_mean_gain_is_one(cfg):
    rng = np.random.default_rng(3)
    bb, bu = beam_params(derive_params(cfg))
    g = sample_interferer_gain(bb, bu, rng, size=2_000_000)
    assert set(np.unique(g)) <= {0.0, bb.n * bu.n}
    assert abs(g.mean() - 1.0) < 3 * g.std() / math.sqrt(len(g))
    omni = BeamParams.from_width(2 * math.pi, 1.0)
    assert np.all(sample_interferer_gain(omni, omni, rng, size=100) == 1.0)


def test_serving_gain(cfg):
    rng = np.random.default_rng(4)
    bb, bu = beam_params(derive_params(cfg))
    g = sample_serving_gain(bb, bu, rng, size=200_000)
    p = serving_gain_probability(bb, bu)
    hit = (g > 0).mean()
    assert abs(hit - p) < 3 * math.sqrt(p * (1 - p) / len(g))
    assert np.all(g[g > 0] == bb.n * bu.n)
    sharp = BeamParams.from_width(0.25, 1e-10), BeamParams.from_width(1.0, 1e-10)
    assert np.all(sample_serving_gain(*sharp, rng, size=1000) == sharp[0].n * sharp[1].n)


def test_fading_moments():
    h = sample_fading(np.random.default_rng(5), size=1_000_000)
    n = len(h)
    assert abs(h.mean() - 1) < 3 / math.sqrt(n)
    assert abs(h.var() - 1) < 3 * math.sqrt(8 / n)
    assert abs((h > math.log(2)).mean() - 0.5) < 3 * 0.5 / math.sqrt(n)
    assert abs((h > 3).mean() - math.exp(-3)) < 3 * math.sqrt(math.exp(-3) / n)
