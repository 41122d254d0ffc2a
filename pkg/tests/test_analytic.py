import math

import numpy as np
import pytest
from hypothesis import given, settings, strategies as st
from scipy import integrate

from ris_stogeo.analytic import (AnalyticModel, QuadratureSpec, _feasible_area_exact, feasible_area,
                                 feasible_area_slope, polar_path_integral)
from ris_stogeo.channel import alignment_probability
from ris_stogeo.params import ScenarioConfig, beta_upper_bound, derive_params


@pytest.fixture(scope="module")
def model(cfg):
    return AnalyticModel(cfg)


# ------------------------------------------------------------ kernel

def test_kernel_table_matches_quadrature():
    for m in [1e-6, 1e-3, 0.05, 0.4, 1.3, 3.0, 7.5]:
        assert feasible_area(m) == pytest.approx(_feasible_area_exact(m), rel=1e-8, abs=0)
    # small-m behaviour: A(m)/(sinh m cosh m) -> 1/pi
    assert feasible_area(1e-6) / (math.sinh(1e-6) * math.cosh(1e-6)) == pytest.approx(1 / math.pi, rel=1e-6)


def test_kernel_slope():
    m = np.array([1e-4, 0.1, 0.5, 1.0, 2.5, 12.0])
    np.testing.assert_allclose(feasible_area_slope(m), feasible_area(m) / np.sinh(m), rtol=1e-12)
    assert feasible_area_slope(0.0) == pytest.approx(1 / math.pi)


@pytest.mark.parametrize("u, lo, hi", [(80.0, 80.0, 150.0), (200.0, 230.0, 600.0), (50.0, 20.0, 3000.0)])
def test_elliptic_matches_polar(model, u, lo, hi):
    eta = model.eta

    def elliptic(weight):
        a = math.acosh(max(lo / u, 1.0))
        b = math.acosh(hi / u)
        f = lambda m: weight(u * math.cosh(m)) * math.exp(-eta * u * math.cosh(m)) * feasible_area(m)
        return u * u * integrate.quad(f, a, b, limit=200, epsabs=0, epsrel=1e-10)[0]

    one = lambda d: np.ones_like(d)
    kern = lambda d: 1.0 / (1.0 + (d / 120.0) ** 4 / 2.0)
    for w in (one, kern):
        ref = polar_path_integral(u, eta, lo, hi, w, n_t=96, n_psi=128)
        assert elliptic(w) == pytest.approx(ref, rel=2e-4)


def test_threshold_below_bs_distance_counts_every_position(model):
    # with the threshold under u, every RIS path exceeds it
    u = 150.0
    whole = polar_path_integral(u, model.eta, 0.0, model.d_max, n_t=96, n_psi=128)
    part = polar_path_integral(u, model.eta, 60.0, model.d_max, n_t=96, n_psi=128)
    assert part == pytest.approx(whole, rel=1e-10)


# ------------------------------------------------------------ distance laws

def test_direct_law(model, cfg):
    assert model.cdf_direct(0.0) == 0.0
    assert model.pdf_direct(0.0) == 0.0
    lim = 1 - math.exp(-2 * math.pi * cfg.lambda_b / model.eta ** 2)
    assert model.cdf_direct_limit() == pytest.approx(lim, rel=1e-14)
    assert lim == pytest.approx(0.9364, abs=1e-4)
    assert model.cdf_direct(model.r_max) == pytest.approx(lim, abs=1e-4)
    x = np.linspace(5, 1500, 40)
    h = 1e-3
    fd = (model.cdf_direct(x + h) - model.cdf_direct(x - h)) / (2 * h)
    np.testing.assert_allclose(model.pdf_direct(x), fd, rtol=1e-6)
    mass = integrate.quad(model.pdf_direct, 0, model.r_max, limit=200)[0]
    assert mass == pytest.approx(float(model.cdf_direct(model.r_max)), rel=1e-3)


def test_reflected_given_u(model):
    assert model.cdf_reflected_given_u(100.0, 100.0) == 0.0
    assert model.d_cdf_reflected_given_u(90.0, 100.0) == 0.0
    rng = np.random.default_rng(0)
    u = rng.uniform(10, 800, 20)
    x = u * rng.uniform(1.01, 4, 20)
    h = 1e-3 * u
    fd = (model.cdf_reflected_given_u(x + h, u) - model.cdf_reflected_given_u(x - h, u)) / (2 * h)
    np.testing.assert_allclose(model.d_cdf_reflected_given_u(x, u), fd, rtol=1e-3, atol=1e-9)
    for uu in (30.0, 300.0):
        total = integrate.quad(lambda t: float(model.d_cdf_reflected_given_u(t, uu)), uu, model.d_max, limit=200)[0]
        assert 0 < total <= 1.0
        assert total == pytest.approx(float(model.cdf_reflected_given_u(model.d_max, uu)), rel=1e-3)


def test_no_ris_means_no_reflected_links(cfg):
    m = AnalyticModel(cfg.replace(mu=0.0))
    x = np.linspace(1, 2000, 11)
    assert np.all(m.cdf_reflected_given_u(x, 50.0) == 0)
    assert np.all(m.cdf_reflected(x) == 0)
    assert m.cdf_reflected_limit() == 0
    ap = m.association_probabilities()
    # only the truncation at r_max separates P_D from 1 - P_O here
    assert ap.p_reflected == pytest.approx(0.0, abs=1e-5)
    assert ap.p_outage == pytest.approx(math.exp(-2 * math.pi * cfg.lambda_b / m.eta ** 2), rel=1e-12)


def test_reflected_law(model):
    x = np.linspace(20, 2500, 30)
    f = model.cdf_reflected(x)
    assert f[0] >= 0 and np.all(np.diff(f) >= 0) and f[-1] <= 1
    h = 0.05
    fd = (model.cdf_reflected(x + h) - model.cdf_reflected(x - h)) / (2 * h)
    np.testing.assert_allclose(model.pdf_reflected(x), fd, rtol=1e-3, atol=1e-10)
    assert model.cdf_reflected(0.0) == 0.0
    assert model.cdf_reflected(2.0 * model.r_max) == pytest.approx(model.cdf_reflected_limit(), rel=1e-3)


# ------------------------------------------------------------ association

def test_association_closes(model):
    ap = model.association_probabilities()
    assert all(0 <= p <= 1 for p in ap.as_tuple())
    assert sum(ap.as_tuple()) == pytest.approx(1.0, abs=1e-12)
    assert ap.closure_error < 1e-6


def test_sparse_blockage_means_direct(cfg):
    ap = AnalyticModel(cfg.replace(lambda_l=1e-9)).association_probabilities()
    assert ap.p_direct > 0.999 and ap.p_outage < 1e-6


# ------------------------------------------------------------ Laplace transforms

def _all_four(m, x, tau):
    return [float(np.ravel(f(x, tau))[0]) for f in (m.laplace_id_direct, m.laplace_id_reflected,
                                                    m.laplace_ir_direct, m.laplace_ir_reflected)]


def test_laplace_range(model):
    for x in (20.0, 100.0, 400.0):
        for tau in (0.5, 2.0, 10.0):
            assert all(0 < v <= 1 for v in _all_four(model, x, tau))


def test_laplace_limits(cfg):
    sparse = AnalyticModel(cfg.replace(lambda_b=1e-12))
    assert all(v == pytest.approx(1.0, abs=1e-6) for v in _all_four(sparse, 100.0, 2.0))
    narrow = AnalyticModel(cfg.replace(m_b=4000, m_u=4000, beta=0.0))
    assert narrow.q_int < 1e-6
    assert all(v == pytest.approx(1.0, abs=1e-4) for v in _all_four(narrow, 100.0, 2.0))


def test_direct_transform_against_quad(model, cfg):
    x, tau = 100.0, 2.0
    q = model.q_int
    f = lambda u: math.exp(-model.eta * u) * u / (1 + (u / x) ** cfg.alpha / tau)
    ref = math.exp(-2 * math.pi * cfg.lambda_b * q * integrate.quad(f, x, np.inf, limit=200)[0])
    assert float(model.laplace_id_direct(x, tau)) == pytest.approx(ref, rel=1e-9)


def test_reflected_spline_matches_direct_evaluation(model):
    rho = np.geomspace(5, 1500, 17)
    for tau in (0.3, 2.0, 10.0):
        a = model._reflected_exponent(rho, tau)
        b = model._reflected_exponent_direct(rho, tau)[0]
        np.testing.assert_allclose(a, b, rtol=1e-4)
        np.testing.assert_allclose(np.exp(-a), np.exp(-b), atol=1e-5)


def test_transforms_decrease_with_threshold(model):
    taus = [0.2, 1.0, 5.0, 25.0]
    for x in (30.0, 150.0):
        vals = np.array([_all_four(model, x, t) for t in taus])
        assert np.all(np.diff(vals, axis=0) <= 1e-15)


# ------------------------------------------------------------ coverage, ASE, EE

def test_coverage_basic(model):
    taus = np.geomspace(0.1, 1e4, 9)
    p = model.coverage_probability(taus)
    assert np.all((p >= 0) & (p <= 1))
    assert np.all(np.diff(p) <= 1e-12)
    # very close users keep coverage, so P ~ 1/sqrt(tau) far out
    far = model.coverage_probability(np.array([1e12, 1e16, 1e20]))
    assert far[1] / far[0] == pytest.approx(1e-2, rel=0.05)
    assert far[2] < 1e-8
    with pytest.raises(ValueError):
        model.coverage_probability(0.0)


def test_coverage_vanishes_with_noise(cfg):
    vals = [AnalyticModel(cfg.replace(n0=n)).coverage_probability() for n in (1e-9, 1e-3, 1e3, 1e9)]
    assert all(a >= b for a, b in zip(vals, vals[1:]))
    # noise-limited tail goes like 1/sqrt(N0)
    assert vals[3] / vals[2] == pytest.approx(1e-3, rel=0.05)


def test_beta_enters_through_alignment_only(cfg):
    b1, b2 = 0.2, 2.0
    m1, m2 = AnalyticModel(cfg.replace(beta=b1)), AnalyticModel(cfg.replace(beta=b2))
    p = lambda m: alignment_probability(m.dp.sigma_b2, m.dp.theta_b) * alignment_probability(m.dp.sigma_u2, m.dp.theta_u)
    assert m1.coverage_probability() / m2.coverage_probability() == pytest.approx(p(m1) / p(m2), rel=1e-12)


@settings(max_examples=8, deadline=None)
@given(b1=st.floats(0, 3.9), b2=st.floats(0, 3.9))
def test_coverage_nondecreasing_in_beta(cfg, b1, b2):
    lo, hi = sorted((b1, b2))
    assert AnalyticModel(cfg.replace(beta=lo)).coverage_probability() <= \
        AnalyticModel(cfg.replace(beta=hi)).coverage_probability() + 1e-12


def test_ase_ee(model, cfg):
    dp = derive_params(cfg)
    a = model.ase()
    assert a > 0
    assert a == pytest.approx(dp.t_d / cfg.frame_len * cfg.lambda_b * model.rate_integral())
    pw = model.power_density()
    assert pw * 1e6 == pytest.approx(10 * 10 + 300 * 10 ** (1.5 - 3), rel=1e-12)
    assert pw * 1e6 == pytest.approx(109.49, abs=0.01)
    assert model.ee() == a / pw
    # rate integral is at least log2(1 + tau) * coverage
    assert model.rate_integral() >= math.log2(1 + cfg.tau) * model.coverage_probability()


def test_ase_limits(cfg):
    near = AnalyticModel(cfg.replace(beta=beta_upper_bound(cfg) * (1 - 1e-9)))
    assert near.ase() < 1e-12
    no_ris = AnalyticModel(cfg.replace(mu=0.0))
    assert no_ris.ee() == pytest.approx(no_ris.ase() / (cfg.lambda_b * cfg.p_b), rel=1e-15)
    m = AnalyticModel(cfg)
    vals = [m.ase(t) for t in (0.5, 2.0, 1e3, 1e12)]
    assert all(a >= b for a, b in zip(vals, vals[1:]))
    assert vals[-1] < 1e-4 * vals[0]


def test_rate_integral_threshold_resolution(cfg):
    coarse = AnalyticModel(cfg).rate_integral()
    fine = AnalyticModel(cfg, QuadratureSpec(n_thresholds=96)).rate_integral()
    assert coarse == pytest.approx(fine, rel=1e-3)


def test_grid_refinement(model):
    assert model.convergence_check() < model.quad.rel_tol


def test_density_modes(cfg):
    vals = {d: AnalyticModel(cfg, density=d).coverage_probability() for d in ("joint", "normalized", "defective")}
    assert all(0 < v < 1 for v in vals.values())
    assert vals["defective"] <= vals["normalized"]
    with pytest.raises(ValueError):
        AnalyticModel(cfg, density="other")


def test_quadrature_spec_validation(cfg):
    eta = derive_params(cfg).eta
    for bad in (QuadratureSpec(rel_tol=0.1), QuadratureSpec(grid_u=8), QuadratureSpec(r_max=1.0)):
        with pytest.raises(ValueError):
            bad.validate(eta)
    QuadratureSpec().validate(eta)


def test_model_rejects_invalid_config():
    with pytest.raises(ValueError):
        AnalyticModel(ScenarioConfig(gamma=1.5))
