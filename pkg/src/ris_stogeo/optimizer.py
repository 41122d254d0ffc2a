"""Optimal training overhead and RIS deployment fraction."""
from __future__ import annotations

import math
from dataclasses import dataclass, field

import numpy as np
from scipy import optimize, special

from .analytic import AnalyticModel, QuadratureSpec
from .channel import alignment_probability
from .params import ScenarioConfig, beta_upper_bound, check_config

SQRT_PI = math.sqrt(math.pi)


def g_ratio(x):
    """x exp(-x^2) / erf(x), with its limit 1/(2/sqrt(pi)) at 0."""
    x = np.asarray(x, dtype=float)
    with np.errstate(invalid="ignore", divide="ignore"):
        out = x * np.exp(-x * x) / special.erf(x)
    return np.where(x == 0, SQRT_PI / 2, out)


@dataclass(frozen=True)
class BetaStarResult:
    beta_star: float
    residual: float
    objective: float
    method: str
    boundary: bool = False
    diagnostics: dict = field(default_factory=dict)


class BetaProblem:
    """Training-overhead trade-off for one scenario.

    More pilots shrink the beam-alignment error but leave fewer symbols for
    data; the objective is ``(beta_max - beta) * p_align_bs * p_align_ue``,
    which is proportional to ASE and EE in beta.
    """

    def __init__(self, cfg: ScenarioConfig):
        self.cfg = check_config(cfg.replace(beta=0.0))
        self.beta_max = beta_upper_bound(cfg)
        th_b, th_u = 4.0 / cfg.m_b, 4.0 / cfg.m_u
        self.a = th_b / (2 * math.pi * math.sqrt(2 * cfg.k_b))
        self.b = th_u / (2 * math.pi * math.sqrt(2 * cfg.k_u))
        self.c = 1.0 / math.sqrt(2 * cfg.k_b)
        self.d = 1.0 / math.sqrt(2 * cfg.k_u)
        self.th_b, self.th_u = th_b, th_u

    def _f(self, beta):
        return np.sqrt(1.0 + np.asarray(beta, dtype=float) * self.cfg.snr)

    def alignment(self, beta):
        s2 = math.pi ** 2 / self._f(beta) ** 2
        return (alignment_probability(self.cfg.k_b * s2, self.th_b)
                * alignment_probability(self.cfg.k_u * s2, self.th_u))

    def objective(self, beta):
        return (self.beta_max - np.asarray(beta, dtype=float)) * self.alignment(beta)

    def residual(self, beta):
        """Stationarity condition of the objective, scaled so the root is at 0."""
        beta = np.asarray(beta, dtype=float)
        f = self._f(beta)
        br = (g_ratio(self.a * f) + g_ratio(self.b * f) - g_ratio(self.c * f) - g_ratio(self.d * f)) / f
        out = self.cfg.snr / (SQRT_PI * f) * (self.beta_max - beta) * br - 1.0
        return out[()] if out.ndim == 0 else out

    def scan(self, tol: float = 1e-9, n_grid: int = 256) -> BetaStarResult:
        grid = np.linspace(0.0, self.beta_max, n_grid + 1)[:-1]
        vals = self.objective(grid)
        i = int(np.argmax(vals))
        inner = (vals[1:-1] > vals[:-2]) & (vals[1:-1] >= vals[2:])
        n_modes = int(inner.sum()) + int(vals[0] > vals[1]) + int(vals[-1] > vals[-2])
        diag = {"grid_modes": n_modes}
        if n_modes > 1:
            diag["warning"] = "objective has several local maxima; refined the global grid maximum"
        lo = grid[max(i - 1, 0)]
        hi = grid[i + 1] if i + 1 < len(grid) else self.beta_max
        neg = lambda x: -float(self.objective(min(max(x, 0.0), self.beta_max)))
        if i == 0 and vals[0] >= vals[1]:
            # maximiser may sit on the boundary beta = 0
            x = _golden(neg, 0.0, hi, tol)
            x = 0.0 if neg(0.0) <= neg(x) else x
        else:
            x = _golden(neg, lo, hi, tol)
        boundary = x <= tol
        return BetaStarResult(x, float(self.residual(x)), float(self.objective(x)), "scan", boundary, diag)

    def root(self, xtol: float = 1e-12) -> BetaStarResult:
        hi = self.beta_max * (1 - 1e-12)
        grid = np.linspace(0.0, hi, 257)
        r = self.residual(grid)
        changes = np.flatnonzero(np.sign(r[:-1]) != np.sign(r[1:]))
        if len(changes) == 0:
            res = self.scan()
            return BetaStarResult(res.beta_star, res.residual, res.objective, "scan", True,
                                  {"reason": "no sign change of the stationarity condition"})
        j = changes[0]
        x = optimize.brentq(self.residual, grid[j], grid[j + 1], xtol=xtol, rtol=4 * np.finfo(float).eps)
        diag = {"sign_changes": int(len(changes))}
        return BetaStarResult(x, float(self.residual(x)), float(self.objective(x)), "root", False, diag)


def _golden(fun, lo, hi, tol):
    """Golden-section minimiser on [lo, hi]."""
    invphi = (math.sqrt(5) - 1) / 2
    a, b = lo, hi
    c = b - invphi * (b - a)
    d = a + invphi * (b - a)
    fc, fd = fun(c), fun(d)
    while b - a > tol:
        if fc <= fd:
            b, d, fd = d, c, fc
            c = b - invphi * (b - a)
            fc = fun(c)
        else:
            a, c, fc = c, d, fd
            d = a + invphi * (b - a)
            fd = fun(d)
    return 0.5 * (a + b)


def stationarity_residual(cfg: ScenarioConfig, beta):
    return BetaProblem(cfg).residual(beta)


def optimal_beta(cfg: ScenarioConfig, method: str = "scan") -> BetaStarResult:
    prob = BetaProblem(cfg)
    if method == "scan":
        return prob.scan()
    if method == "root":
        return prob.root()
    raise ValueError("method must be 'root' or 'scan'")


@dataclass(frozen=True)
class MuStarResult:
    mu_star: float
    objective: float
    metric: str
    grid: np.ndarray
    curve: np.ndarray


METRICS = ("coverage", "ase", "ee")


def metric_value(model: AnalyticModel, metric: str) -> float:
    if metric == "coverage":
        return model.coverage_probability()
    if metric == "ase":
        return model.ase()
    if metric == "ee":
        return model.ee()
    raise ValueError(f"metric must be one of {METRICS}")


def mu_curves(cfg: ScenarioConfig, resolution: int = 11, quad: QuadratureSpec | None = None,
              metrics=METRICS) -> tuple[np.ndarray, dict]:
    """Analytic metric curves over an even grid of deployment fractions."""
    if resolution < 11:
        raise ValueError("resolution must be at least 11")
    grid = np.linspace(0.0, 1.0, resolution)
    out = {m: np.empty(resolution) for m in metrics}
    for i, mu in enumerate(grid):
        model = AnalyticModel(cfg.replace(mu=float(mu)), quad)
        for m in metrics:
            out[m][i] = metric_value(model, m)
    return grid, out


def argmax_first(curve) -> int:
    """Index of the maximum, ties going to the smallest index."""
    curve = np.asarray(curve)
    return int(np.flatnonzero(curve == curve.max())[0])


def optimal_mu(cfg: ScenarioConfig, metric: str = "ase", resolution: int = 11,
               quad: QuadratureSpec | None = None) -> MuStarResult:
    if metric not in METRICS:
        raise ValueError(f"metric must be one of {METRICS}")
    grid, curves = mu_curves(cfg, resolution, quad, (metric,))
    c = curves[metric]
    i = argmax_first(c)
    return MuStarResult(float(grid[i]), float(c[i]), metric, grid, c)
