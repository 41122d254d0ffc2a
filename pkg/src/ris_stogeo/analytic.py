"""Numerical evaluation of the link-distance laws, association probabilities,
interference Laplace transforms, coverage, ASE and EE.

Reflected paths are integrated in elliptic coordinates with the user and the
BS as foci.  For a BS at distance ``u`` a path of length ``d`` lies on the
ellipse ``d = u cosh(m)``, and both LoS factors combine into ``exp(-eta d)``.
Integrating the feasibility probability over the angular coordinate leaves a
one-dimensional kernel ``A(m)`` that does not depend on any parameter, so it
is tabulated once per process.  Every double integral over RIS positions
thus becomes a single integral over ``m``.
"""
from __future__ import annotations

import math
from dataclasses import dataclass, replace
from functools import lru_cache

import numpy as np
from numpy.polynomial.legendre import leggauss
from scipy import integrate, special
from scipy.interpolate import CubicSpline, PchipInterpolator

from .channel import beam_params, interferer_gain_probability, serving_gain_probability
from .geometry import bs_ris_distance, feasibility_probability
from .params import ScenarioConfig, check_config, derive_params

DENSITY_MODES = ("joint", "normalized", "defective")

_MU_TABLE_MAX = 40.0


class ConvergenceError(RuntimeError):
    def __init__(self, message, achieved=None):
        super().__init__(message)
        self.achieved = achieved


@dataclass(frozen=True)
class QuadratureSpec:
    """Tolerances and node counts for the nested integrals.

    ``grid_mu`` nodes integrate along the elliptic coordinate, ``grid_u`` along
    BS distance, ``grid_x`` is the total count of serving-distance nodes and
    ``grid_rho`` the size of the table on which the reflected-interference
    transform is interpolated.  ``grid_t`` and ``grid_psi`` size the polar
    reference evaluator.
    """
    rel_tol: float = 1e-3
    eps_los: float = 1e-6
    r_max: float | None = None
    grid_u: int = 64
    grid_mu: int = 96
    grid_x: int = 384
    grid_rho: int = 72
    grid_t: int = 64
    grid_psi: int = 64
    n_thresholds: int = 24

    def validate(self, eta: float):
        if not 0 < self.rel_tol <= 1e-2:
            raise ValueError("rel_tol must lie in (0, 1e-2]")
        if not 0 < self.eps_los < 1:
            raise ValueError("eps_los must lie in (0, 1)")
        if self.r_max is not None and self.r_max < 5.0 / eta:
            raise ValueError("r_max must be at least 5/eta")
        for name in ("grid_u", "grid_mu", "grid_x", "grid_rho", "grid_t", "grid_psi"):
            if getattr(self, name) < 32:
                raise ValueError(f"{name} must be at least 32")
        if self.n_thresholds < 8:
            raise ValueError("n_thresholds must be at least 8")

    def refined(self, factor: int = 2) -> "QuadratureSpec":
        return replace(self, grid_u=self.grid_u * factor, grid_mu=self.grid_mu * factor,
                       grid_x=self.grid_x * factor, grid_rho=self.grid_rho * factor)


@dataclass(frozen=True)
class AssociationProbabilities:
    p_direct: float
    p_reflected: float
    p_outage: float
    # difference between the two independent routes to the reflected share
    closure_error: float = 0.0

    def as_tuple(self):
        return self.p_direct, self.p_reflected, self.p_outage


# ---------------------------------------------------------------- kernel A(m)

def _feasible_area_exact(m: float) -> float:
    """A(m): feasibility-weighted angular integral on the ellipse of index m."""
    s = math.sinh(m)
    if s == 0.0:
        return 0.0

    def f(nu):
        # 1/2 - atan(sin nu / s)/pi, written without cancellation
        sn = math.sin(nu)
        return math.atan2(s, sn) / math.pi * (s * s + sn * sn)

    # the integrand bends sharply near nu ~ s for small s
    pts = [p for p in (s / 8, s, 8 * s) if p < 1.5] or None
    return integrate.quad(f, 0.0, math.pi / 2, points=pts, epsabs=0.0,
                          epsrel=1e-13, limit=200)[0]


@lru_cache(maxsize=1)
def _kernel_table():
    # b(m) = A(m) / (sinh m cosh m) is bounded: 1/pi at 0, pi/8 as m grows
    # b is not smooth at 0 (m log m terms), hence the geometric nodes there
    ms = np.concatenate([[0.0], np.geomspace(1e-7, 0.01, 120)[:-1], np.linspace(0.01, 4.0, 1597)[:-1],
                         np.linspace(4.0, _MU_TABLE_MAX, 721)])
    vals = np.empty_like(ms)
    vals[0] = 1.0 / math.pi
    for i, m in enumerate(ms[1:], 1):
        vals[i] = _feasible_area_exact(m) / (math.sinh(m) * math.cosh(m))
    return CubicSpline(ms, vals)


def feasible_area(m):
    """Tabulated A(m) (exact quadrature behind a cubic spline)."""
    m = np.asarray(m, dtype=float)
    b = _kernel_table()(np.minimum(m, _MU_TABLE_MAX))
    return b * np.sinh(m) * np.cosh(m)


def feasible_area_slope(m):
    """A(m) / sinh(m); finite at m = 0."""
    m = np.asarray(m, dtype=float)
    return _kernel_table()(np.minimum(m, _MU_TABLE_MAX)) * np.cosh(m)


# ---------------------------------------------------------------- quadrature

@lru_cache(maxsize=32)
def _legendre(n: int):
    x, w = leggauss(n)
    return 0.5 * (x + 1.0), 0.5 * w


def _gauss(a, b, n: int):
    """Gauss-Legendre nodes/weights on [a, b], broadcasting over a and b."""
    x, w = _legendre(n)
    a = np.asarray(a, dtype=float)[..., None]
    b = np.asarray(b, dtype=float)[..., None]
    return a + (b - a) * x, (b - a) * w


def _composite(edges, n: int):
    x, w = _gauss(edges[:-1], edges[1:], n)
    return x.ravel(), w.ravel()


def _mixed_edges(lo: float, hi: float, first: float, n_lin: int):
    """Panel edges doubling from `first` and merged with a uniform grid."""
    geo = [0.0]
    e = first
    while e < hi - lo:
        geo.append(e)
        e *= 2.0
    edges = np.union1d(np.array(geo), np.linspace(0.0, hi - lo, n_lin + 1)) + lo
    edges = edges[edges <= hi]
    if edges[-1] < hi:
        edges = np.append(edges, hi)
    # drop slivers that would only waste nodes
    keep = np.concatenate([[True], np.diff(edges) > 1e-9 * (hi - lo)])
    return edges[keep]


# ---------------------------------------------------------------- model

class AnalyticModel:
    """Analytic evaluator for one scenario.

    Instances are immutable once built; cached tables are filled lazily and
    depend only on the scenario and quadrature settings.
    """

    def __init__(self, cfg: ScenarioConfig, quad: QuadratureSpec | None = None,
                 density: str = "joint"):
        check_config(cfg)
        if density not in DENSITY_MODES:
            raise ValueError(f"density must be one of {DENSITY_MODES}")
        self.cfg = cfg
        self.dp = derive_params(cfg)
        self.quad = quad or QuadratureSpec()
        self.quad.validate(self.dp.eta)
        self.density = density

        dp = self.dp
        self.eta = dp.eta
        self.lam_b = cfg.lambda_b
        self.lam_r = dp.lambda_r
        self.alpha = cfg.alpha
        self.gamma = cfg.gamma
        bb, bu = beam_params(dp)
        self.nn = dp.n_b * dp.n_u
        self.p_serv = serving_gain_probability(bb, bu)
        self.q_int = interferer_gain_probability(bb, bu)
        self.r_max = self.quad.r_max or math.log(1.0 / self.quad.eps_los) / self.eta
        self.d_max = 2.0 * self.r_max
        self._laplace_cache: dict[float, tuple[np.ndarray, np.ndarray]] = {}
        self._nodes = None
        self._assoc = None
        self._rtable = None

    # -------------------------------------------------- direct link law

    def _direct_measure(self, x):
        # 2*pi*lam_b * int_0^x exp(-eta u) u du
        y = self.eta * np.asarray(x, dtype=float)
        return 2 * np.pi * self.lam_b * special.gammainc(2.0, y) / self.eta ** 2

    def cdf_direct(self, x):
        return -np.expm1(-self._direct_measure(x))

    def pdf_direct(self, x):
        x = np.asarray(x, dtype=float)
        return 2 * np.pi * self.lam_b * x * np.exp(-self.eta * x - self._direct_measure(x))

    def cdf_direct_limit(self) -> float:
        return float(-np.expm1(-2 * np.pi * self.lam_b / self.eta ** 2))

    # -------------------------------------------------- reflected link law

    def reflected_measure(self, x, u):
        """Mean number of usable reflected paths of length <= x from a BS at u."""
        x, u = np.broadcast_arrays(np.asarray(x, dtype=float), np.asarray(u, dtype=float))
        out = np.zeros(x.shape)
        ok = (x > u) & (u > 0)
        if not np.any(ok):
            return out
        uu = u[ok]
        hi = np.arccosh(np.minimum(x[ok], self.d_max) / uu)
        m, w = _gauss(np.zeros_like(hi), hi, self.quad.grid_mu)
        g = np.exp(-self.eta * uu[:, None] * np.cosh(m)) * feasible_area(m)
        out[ok] = uu * uu * np.sum(w * g, axis=-1)
        return out

    def cdf_reflected_given_u(self, x, u):
        return -np.expm1(-self.lam_r * self.reflected_measure(x, u))

    def d_cdf_reflected_given_u(self, x, u):
        x, u = np.broadcast_arrays(np.asarray(x, dtype=float), np.asarray(u, dtype=float))
        out = np.zeros(x.shape)
        ok = (x > u) & (u > 0)
        if np.any(ok):
            xx, uu = x[ok], u[ok]
            lam = self.reflected_measure(xx, uu)
            slope = feasible_area_slope(np.arccosh(xx / uu))
            out[ok] = self.lam_r * np.exp(-self.lam_r * lam) * uu * np.exp(-self.eta * xx) * slope
        return out

    def _blocked_bs_measure(self, x):
        """H(x) and dH/dx, where F_R(x) = 1 - exp(-2 pi lam_b H(x))."""
        x = np.atleast_1d(np.asarray(x, dtype=float))
        h = np.zeros(x.shape)
        dh = np.zeros(x.shape)
        pos = x > 0
        if self.lam_r == 0 or not np.any(pos):
            return h, dh
        v, wv = _legendre(self.quad.grid_u)
        xs = x[pos]
        hp, dhp = np.empty(xs.shape), np.empty(xs.shape)
        # chunks keep the (x, u, m) node arrays small
        for i in range(0, len(xs), 256):
            xp = xs[i:i + 256, None]
            # u = x (1 - v^2) clusters nodes near u = x where F_{R|u} switches on
            u = xp * (1.0 - v * v)
            du = 2.0 * xp * v * wv
            xb = np.broadcast_to(xp, u.shape)
            blocked = -np.expm1(-self.eta * u) * u * du
            hp[i:i + 256] = np.sum(blocked * self.cdf_reflected_given_u(xb, u), axis=1)
            dhp[i:i + 256] = np.sum(blocked * self.d_cdf_reflected_given_u(xb, u), axis=1)
        h[pos], dh[pos] = hp, dhp
        return h, dh

    def cdf_reflected(self, x):
        x = np.asarray(x, dtype=float)
        h, _ = self._blocked_bs_measure(x)
        return (-np.expm1(-2 * np.pi * self.lam_b * h)).reshape(x.shape)

    def pdf_reflected(self, x):
        x = np.asarray(x, dtype=float)
        h, dh = self._blocked_bs_measure(x)
        out = 2 * np.pi * self.lam_b * np.exp(-2 * np.pi * self.lam_b * h) * dh
        return out.reshape(x.shape)

    def cdf_reflected_limit(self) -> float:
        if self.lam_r == 0:
            return 0.0
        edges = _mixed_edges(0.0, 1.5 * self.r_max, 1.0, 48)
        u, w = _composite(edges, 16)
        f = -np.expm1(-self.eta * u) * self.cdf_reflected_given_u(np.full_like(u, self.d_max), u)
        return float(-np.expm1(-2 * np.pi * self.lam_b * np.sum(w * f * u)))

    # -------------------------------------------------- serving-distance nodes

    def _serving_nodes(self):
        if self._nodes is not None:
            return self._nodes
        per_panel = 12
        n_lin = max(8, self.quad.grid_x // (2 * per_panel))
        edges = _mixed_edges(0.0, self.r_max, 0.05, n_lin)
        x, w = _composite(edges, per_panel)
        g = self.gamma ** (1.0 / self.alpha)
        fd = self.pdf_direct(x)
        fr = self.pdf_reflected(x)
        # probability that nothing of the other kind beats a link at x
        no_refl = 1.0 - self.cdf_reflected(x * g)
        no_direct = 1.0 - self.cdf_direct(x / g)
        self._nodes = dict(x=x, w=w, fd=fd, fr=fr, no_refl=no_refl, no_direct=no_direct)
        return self._nodes

    def association_probabilities(self) -> AssociationProbabilities:
        if self._assoc is not None:
            return self._assoc
        nd = self._serving_nodes()
        p_out = (1.0 - self.cdf_direct_limit()) * (1.0 - self.cdf_reflected_limit())
        p_dir = float(np.sum(nd["w"] * nd["fd"] * nd["no_refl"]))
        p_ref = 1.0 - p_out - p_dir
        p_ref_alt = float(np.sum(nd["w"] * nd["fr"] * nd["no_direct"]))
        self._assoc = AssociationProbabilities(p_dir, p_ref, p_out, abs(p_ref - p_ref_alt))
        if self._assoc.closure_error > 10 * self.quad.rel_tol:
            raise ConvergenceError("association probabilities do not close",
                                   achieved=self._assoc.closure_error)
        return self._assoc

    # -------------------------------------------------- Laplace transforms

    def _direct_exponent(self, rho, tau):
        """-log of the direct-interference transform; rho and tau broadcast."""
        rho, tau = np.broadcast_arrays(np.asarray(rho, dtype=float), np.asarray(tau, dtype=float))
        edges = _mixed_edges(0.0, self.d_max, 1.0, 24)
        s, ws = _composite(edges, 12)
        u = rho[..., None] + s
        z = (u / rho[..., None]) ** self.alpha
        f = np.exp(-self.eta * u) * u / (1.0 + z / tau[..., None])
        return 2 * np.pi * self.lam_b * self.q_int * np.sum(ws * f, axis=-1)

    def _reflected_terms(self, rho):
        """Tau-free pieces of the reflected-interference exponent at radii rho.

        Returns (weights, z) with the exponent for threshold tau equal to
        ``2 pi lam_b sum_u wu (1 - exp(-q lam_r sum_m wm / (1 + z / tau)))``.
        """
        rho = np.asarray(rho, dtype=float)
        v, wv = _legendre(max(32, self.quad.grid_u // 2))
        edges = _mixed_edges(0.0, self.d_max, 1.0, 12)
        s, ws = _composite(edges, 12)
        r = rho[:, None]
        u = np.concatenate([r * (1.0 - v * v), r + s], axis=1)
        wu = np.concatenate([2.0 * r * v * wv * np.ones_like(r), np.broadcast_to(ws, (len(rho), len(s)))], axis=1)
        lo = np.arccosh(np.maximum(r / u, 1.0))
        hi = np.arccosh(np.maximum(self.d_max / u, 1.0))
        hi = np.maximum(hi, lo)
        m, wm = _gauss(lo, hi, self.quad.grid_mu)
        d = u[..., None] * np.cosh(m)
        base = wm * (u * u)[..., None] * np.exp(-self.eta * d) * feasible_area(m)
        z = (d / r[..., None]) ** self.alpha
        return wu * u, base, z

    def _reflected_exponent_direct(self, rho, tau):
        rho = np.atleast_1d(np.asarray(rho, dtype=float))
        wu, base, z = self._reflected_terms(rho)
        out = np.empty((np.size(tau), len(rho)))
        for i, t in enumerate(np.atleast_1d(tau)):
            j = np.sum(base / (1.0 + z / t), axis=-1)
            out[i] = 2 * np.pi * self.lam_b * np.sum(wu * -np.expm1(-self.q_int * self.lam_r * j), axis=-1)
        return out

    def _rho_grid(self):
        if self._rtable is None:
            nd = self._serving_nodes()
            g = self.gamma ** (1.0 / self.alpha)
            lo = 0.9 * nd["x"].min() * g
            hi = 1.1 * nd["x"].max()
            rho = np.geomspace(lo, hi, self.quad.grid_rho)
            self._rtable = (rho, self._reflected_terms(rho))
        return self._rtable

    def _reflected_exponent(self, rho, tau):
        """-log of the reflected-interference transform via a log-log spline."""
        rho = np.asarray(rho, dtype=float)
        if self.lam_r == 0:
            return np.zeros(rho.shape)
        grid, (wu, base, z) = self._rho_grid()
        tau = float(tau)
        j = np.sum(base / (1.0 + z / tau), axis=-1)
        e = 2 * np.pi * self.lam_b * np.sum(wu * -np.expm1(-self.q_int * self.lam_r * j), axis=-1)
        spl = CubicSpline(np.log(grid), np.log(np.maximum(e, 1e-300)))
        inside = (rho >= grid[0]) & (rho <= grid[-1])
        out = np.exp(spl(np.log(np.clip(rho, grid[0], grid[-1]))))
        if not np.all(inside):
            out = np.where(inside, out, self._reflected_exponent_direct(rho.ravel(), tau)[0].reshape(rho.shape))
        return out

    def laplace_id_direct(self, x, tau):
        """Direct interference transform given a direct serving link at x."""
        return np.exp(-self._direct_exponent(x, tau))

    def laplace_id_reflected(self, x, tau):
        """Direct interference transform given a reflected serving path of length x."""
        g = self.gamma ** (1.0 / self.alpha)
        return np.exp(-self._direct_exponent(np.asarray(x, dtype=float) / g, tau))

    def laplace_ir_direct(self, x, tau):
        """Reflected interference transform given a direct serving link at x."""
        g = self.gamma ** (1.0 / self.alpha)
        x = np.atleast_1d(np.asarray(x, dtype=float))
        return np.exp(-self._reflected_exponent_direct(x * g, tau)[0])

    def laplace_ir_reflected(self, x, tau):
        """Reflected interference transform given a reflected serving path of length x."""
        x = np.atleast_1d(np.asarray(x, dtype=float))
        return np.exp(-self._reflected_exponent_direct(x, tau)[0])

    # -------------------------------------------------- coverage

    def _branch_kernels(self, tau: float):
        key = float(tau)
        hit = self._laplace_cache.get(key)
        if hit is not None:
            return hit
        nd = self._serving_nodes()
        x = nd["x"]
        g = self.gamma ** (1.0 / self.alpha)
        n0 = self.cfg.n0
        noise_d = np.exp(-tau * n0 * x ** self.alpha / self.nn)
        noise_r = np.exp(-tau * n0 * x ** self.alpha / (self.nn * self.gamma))
        kd = noise_d * np.exp(-self._direct_exponent(x, tau) - self._reflected_exponent(x * g, tau))
        kr = noise_r * np.exp(-self._direct_exponent(x / g, tau) - self._reflected_exponent(x, tau))
        self._laplace_cache[key] = (kd, kr)
        return kd, kr

    def _coverage_one(self, tau: float) -> float:
        nd = self._serving_nodes()
        kd, kr = self._branch_kernels(tau)
        w = nd["w"]
        if self.density == "joint":
            val = np.sum(w * kd * nd["fd"] * nd["no_refl"]) + np.sum(w * kr * nd["fr"] * nd["no_direct"])
        else:
            ap = self.association_probabilities()
            id_ = np.sum(w * kd * nd["fd"])
            ir = np.sum(w * kr * nd["fr"])
            if self.density == "normalized":
                md, mr = np.sum(w * nd["fd"]), np.sum(w * nd["fr"])
                id_ = id_ / md if md > 0 else 0.0
                ir = ir / mr if mr > 0 else 0.0
            val = ap.p_direct * id_ + ap.p_reflected * ir
        return float(np.clip(self.p_serv * val, 0.0, 1.0))

    def coverage_probability(self, tau=None):
        """P[SINR > tau]; `tau` may be a scalar or an array (linear)."""
        tau = self.cfg.tau if tau is None else tau
        t = np.asarray(tau, dtype=float)
        if np.any(t <= 0):
            raise ValueError("tau must be positive")
        out = np.array([self._coverage_one(v) for v in t.ravel()]).reshape(t.shape)
        return float(out) if out.ndim == 0 else out

    # -------------------------------------------------- ASE / EE

    def _coverage_tail_end(self, tau: float) -> float:
        p0 = self.coverage_probability(tau)
        hi = tau * 10.0
        while self.coverage_probability(hi) > 1e-4 * p0 and hi < 1e16:
            hi *= 10.0
        return hi

    def rate_integral(self, tau=None) -> float:
        """E[log2(1 + SINR) 1{SINR > tau}] from the coverage-vs-threshold curve."""
        tau = float(self.cfg.tau if tau is None else tau)
        p0 = self.coverage_probability(tau)
        if p0 <= 0:
            return 0.0
        hi = self._coverage_tail_end(tau)
        th = np.geomspace(tau, hi, self.quad.n_thresholds)
        t = np.log1p(th)
        p = self.coverage_probability(th)
        curve = PchipInterpolator(t, p)
        tail = float(curve.integrate(t[0], t[-1]))
        return tail / math.log(2.0) + math.log2(1.0 + tau) * p0

    def spectral_scale(self) -> float:
        """(T_D / T) * lambda_B, the factor turning per-link rate into ASE."""
        return self.dp.t_d / self.cfg.frame_len * self.lam_b

    def power_density(self) -> float:
        return self.lam_b * self.cfg.p_b + self.lam_r * self.cfg.p_r

    def ase(self, tau=None) -> float:
        return self.spectral_scale() * self.rate_integral(tau)

    def ee(self, tau=None) -> float:
        return self.ase(tau) / self.power_density()

    # -------------------------------------------------- diagnostics

    def convergence_check(self, tau=None) -> float:
        """Relative change of coverage when every grid is doubled."""
        tau = self.cfg.tau if tau is None else tau
        fine = AnalyticModel(self.cfg, self.quad.refined(), self.density)
        a = self.coverage_probability(tau)
        b = fine.coverage_probability(tau)
        err = abs(a - b) / max(abs(b), 1e-300)
        if err > self.quad.rel_tol:
            raise ConvergenceError(f"coverage changed by {err:.3g} under grid refinement", achieved=err)
        return err


# ---------------------------------------------------------------- polar reference

def polar_path_integral(u, eta, lo, hi, weight=None, n_t: int = 64, n_psi: int = 64):
    """Reference integral over RIS positions (t, psi) for a BS at distance u.

    Integrates ``p_L(t) p_L(d_BR) p_F weight(d)`` over RISs whose path length
    lies in [lo, hi], using tensor Gauss panels in (psi, t) with t-limits solved
    exactly on each ray.  Slow; used to check the elliptic route.
    """
    psi, wpsi = _composite(np.linspace(0.0, np.pi, 5), n_psi // 4)
    c = np.cos(psi)

    def t_at(d):
        # path length grows monotonically with t along a ray from the user
        if d <= u:
            return np.zeros_like(c)
        return (d * d - u * u) / (2.0 * (d - u * c))

    t_lo = t_at(lo)
    t_hi = t_at(hi)
    total = 0.0
    # split the t range at u, where the BS-RIS leg can be shortest
    for a, b in ((t_lo, np.clip(u * np.ones_like(c), t_lo, t_hi)), (np.clip(u * np.ones_like(c), t_lo, t_hi), t_hi)):
        t, wt = _gauss(a, b, n_t)
        dbr = bs_ris_distance(u, t, psi[:, None])
        pf = feasibility_probability(u, np.maximum(t, 1e-300), psi[:, None])
        f = np.exp(-eta * (t + dbr)) * pf * t
        if weight is not None:
            f = f * weight(t + dbr)
        total += np.sum(wpsi[:, None] * wt * f)
    return 2.0 * total
