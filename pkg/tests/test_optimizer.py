import math

import numpy as np
import pytest
from hypothesis import given, settings, strategies as st
from scipy import special

from ris_stogeo.analytic import AnalyticModel
from ris_stogeo.optimizer import (BetaProblem, argmax_first, stationarity_residual, g_ratio, mu_curves,
                                  optimal_beta, optimal_mu)
from ris_stogeo.params import beta_upper_bound


def test_g_ratio():
    x = np.geomspace(1e-3, 10, 100)
    g = g_ratio(x)
    assert np.all(np.diff(g) < 0)
    assert g_ratio(0.0) == pytest.approx(math.sqrt(math.pi) / 2)
    assert g_ratio(1e-9) == pytest.approx(math.sqrt(math.pi) / 2)
    assert g_ratio(1.0) == pytest.approx(math.exp(-1) / special.erf(1.0))


@given(a=st.floats(1e-4, 20), b=st.floats(1e-4, 20))
def test_g_ratio_decreasing(a, b):
    if a < b:
        assert g_ratio(a) >= g_ratio(b)


def test_constants(cfg):
    p = BetaProblem(cfg)
    assert p.a == pytest.approx(0.25 / (2 * math.pi * math.sqrt(0.04)))
    assert p.b == pytest.approx(1.0 / (2 * math.pi * math.sqrt(0.16)))
    assert p.c == pytest.approx(1 / math.sqrt(0.04))
    assert p.d == pytest.approx(1 / math.sqrt(0.16))
    assert p.beta_max == beta_upper_bound(cfg)


def test_residual_is_scaled_derivative(cfg):
    """Residual + 1 equals -(d/d beta) of the log alignment term times (beta_max - beta)."""
    p = BetaProblem(cfg)
    for beta in (0.1, 0.7, 2.0):
        h = 1e-6
        dlog = (np.log(p.alignment(beta + h)) - np.log(p.alignment(beta - h))) / (2 * h)
        assert p.residual(beta) + 1 == pytest.approx(dlog * (p.beta_max - beta), rel=1e-6)


def test_residual_limits(cfg):
    p = BetaProblem(cfg)
    assert p.residual(p.beta_max * (1 - 1e-12)) == pytest.approx(-1, abs=1e-9)
    # equal errors at both ends and omnidirectional beams cancel the bracket
    flat = BetaProblem(cfg.replace(k_b=0.1, k_u=0.1, m_b=1, m_u=1, m_r=1))
    flat.a, flat.b = flat.c, flat.d
    assert np.allclose(flat.residual(np.linspace(0, 1, 5)), -1.0)
    assert stationarity_residual(cfg, 0.5) == p.residual(0.5)


def test_default_beta_star(cfg):
    r, s = optimal_beta(cfg, "root"), optimal_beta(cfg, "scan")
    assert r.method == "root" and abs(r.residual) <= 1e-8
    assert 0 < r.beta_star < r.diagnostics.get("beta_max", beta_upper_bound(cfg))
    assert abs(r.beta_star - s.beta_star) < 1e-3
    p = BetaProblem(cfg)
    grid = np.linspace(0, p.beta_max, 2000, endpoint=False)
    assert s.objective >= p.objective(grid).max() - 1e-12
    with pytest.raises(ValueError):
        optimal_beta(cfg, "newton")


def test_ase_follows_objective(cfg):
    """ASE in beta is proportional to the objective, so its argmax matches."""
    p = BetaProblem(cfg)
    betas = np.array([0.3, 0.73, 1.5])
    ase = np.array([AnalyticModel(cfg.replace(beta=b)).ase() for b in betas])
    ratio = ase / p.objective(betas)
    np.testing.assert_allclose(ratio, ratio[0], rtol=1e-9)
    # EE is ASE over a beta-free constant, so the optimum is shared
    ee = np.array([AnalyticModel(cfg.replace(beta=b)).ee() for b in betas])
    np.testing.assert_allclose(ee / ase, ee[0] / ase[0], rtol=1e-12)


def test_perfect_alignment_gives_zero(cfg):
    res = optimal_beta(cfg.replace(k_b=1e-6, k_u=1e-6), "root")
    assert res.beta_star < 1e-3
    assert res.boundary and res.method == "scan"


def test_frame_length_trend(cfg):
    b1 = optimal_beta(cfg).beta_star
    b2 = optimal_beta(cfg.replace(frame_len=2 * cfg.frame_len)).beta_star
    assert beta_upper_bound(cfg.replace(frame_len=2 * cfg.frame_len)) == pytest.approx(2 * beta_upper_bound(cfg))
    assert b2 >= b1


@settings(max_examples=25, deadline=None)
@given(mb=st.sampled_from([2, 4, 16, 32, 64]), kb=st.floats(0.01, 0.9), snr_db=st.floats(6, 30),
       frame=st.floats(2000, 20000))
def test_root_matches_scan(cfg, mb, kb, snr_db, frame):
    c = cfg.replace(m_b=mb, k_b=kb, snr=10 ** (snr_db / 10), frame_len=frame)
    r, s = optimal_beta(c, "root"), optimal_beta(c, "scan")
    assert 0 <= s.beta_star < beta_upper_bound(c)
    if r.method == "root" and r.diagnostics["sign_changes"] == 1 and s.diagnostics["grid_modes"] == 1:
        assert abs(r.residual) <= 1e-8
        assert abs(r.beta_star - s.beta_star) < 1e-3


def test_argmax_first():
    assert argmax_first([1, 3, 3, 2]) == 1
    assert argmax_first([5]) == 0


def test_mu_search(cfg):
    with pytest.raises(ValueError):
        optimal_mu(cfg, resolution=5)
    with pytest.raises(ValueError):
        optimal_mu(cfg, metric="latency")
    grid, curves = mu_curves(cfg, 11, metrics=("ee",))
    assert np.allclose(grid, np.linspace(0, 1, 11))
    res = optimal_mu(cfg, "ee")
    assert res.mu_star == grid[argmax_first(curves["ee"])]
    assert res.objective == curves["ee"].max()
