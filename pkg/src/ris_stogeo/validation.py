"""Cross-checks between the analytic model and the simulator."""
from __future__ import annotations

import math
from dataclasses import dataclass

import numpy as np

from .analytic import AnalyticModel
from .montecarlo import Simulator, TrialRecords, ks_statistic
from .optimizer import BetaProblem, g_ratio
from .params import ScenarioConfig, beta_upper_bound

COVERAGE_TAUS_DB = (-5.0, 0.0, 3.0, 5.0, 10.0)
LAPLACE_POINTS = ((50.0, 1.0), (100.0, 2.0), (200.0, 10 ** 0.5))


@dataclass(frozen=True)
class CheckResult:
    name: str
    passed: bool
    detail: str

    def line(self) -> str:
        return f"{'PASS' if self.passed else 'FAIL'}  {self.name}: {self.detail}"


def check_distance_law(model: AnalyticModel, rec: TrialRecords, tol=0.01) -> CheckResult:
    ks = ks_statistic(rec.r_direct, model.cdf_direct)
    return CheckResult("direct-distance law", ks < tol, f"KS={ks:.4f} (< {tol})")


def check_association(model: AnalyticModel, rec: TrialRecords, tol=0.01) -> CheckResult:
    ap = model.association_probabilities().as_tuple()
    freq = [float(np.mean(rec.kind == k)) for k in range(3)]
    gaps = [abs(a - f) for a, f in zip(ap, freq)]
    total = abs(sum(ap) - 1.0)
    ok = max(gaps) <= tol and total <= 1e-6
    detail = ", ".join(f"{n}={a:.4f}/{f:.4f}" for n, a, f in zip(("D", "R", "O"), ap, freq))
    return CheckResult("association probabilities", ok, f"{detail}; |sum-1|={total:.1e}")


def check_coverage(model: AnalyticModel, sim: Simulator, rec: TrialRecords,
                   taus_db=COVERAGE_TAUS_DB, tol=0.02) -> CheckResult:
    parts, worst = [], 0.0
    for tdb in taus_db:
        tau = 10 ** (tdb / 10)
        a = model.coverage_probability(tau)
        m = sim.metrics_from(rec, tau).coverage.value
        worst = max(worst, abs(a - m))
        parts.append(f"{tdb:g}dB {a:.4f}/{m:.4f}")
    return CheckResult("coverage", worst <= tol, f"max|diff|={worst:.4f}; " + ", ".join(parts))


def check_ase_ee(model: AnalyticModel, sim: Simulator, rec: TrialRecords, tol=0.05) -> CheckResult:
    est = sim.metrics_from(rec)
    a_ase, a_ee = model.ase(), model.ee()
    rel_ase = abs(a_ase - est.ase.value) / est.ase.value
    rel_ee = abs(a_ee - est.ee.value) / est.ee.value
    pw = model.power_density()
    ratio_a = abs(a_ase / a_ee - pw) / pw
    ratio_m = abs(est.ase.value / est.ee.value - pw) / pw
    ok = rel_ase <= tol and rel_ee <= tol and ratio_a < 1e-12 and ratio_m < 1e-12
    return CheckResult("ASE/EE", ok, f"ASE rel={rel_ase:.4f}, EE rel={rel_ee:.4f}, "
                                     f"ratio err={max(ratio_a, ratio_m):.1e}")


def laplace_table(model: AnalyticModel, sim: Simulator, n_trials: int, seed: int,
                  points=LAPLACE_POINTS, threads=None):
    """Rows (name, x, tau, analytic, mc, standard error) for all four transforms."""
    g = model.gamma ** (1.0 / model.alpha)
    a_dir, b_ref = [], []
    for x, _ in points:
        a_dir += [x, x / g]
        b_ref += [x * g, x]
    d, r = sim.interference_samples(n_trials, seed, a_dir, b_ref, threads)
    rows = []
    for j, (x, tau) in enumerate(points):
        s_dir = tau * x ** model.alpha / model.nn
        s_ref = s_dir / model.gamma
        cases = (
            ("L_ID direct", model.laplace_id_direct(x, tau), d[:, 2 * j], s_dir),
            ("L_IR direct", model.laplace_ir_direct(x, tau)[0], r[:, 2 * j], s_dir),
            ("L_ID reflected", model.laplace_id_reflected(x, tau), d[:, 2 * j + 1], s_ref),
            ("L_IR reflected", model.laplace_ir_reflected(x, tau)[0], r[:, 2 * j + 1], s_ref),
        )
        for name, an, samples, s in cases:
            v = np.exp(-s * samples)
            rows.append((name, x, tau, float(an), float(v.mean()), float(v.std(ddof=1) / math.sqrt(len(v)))))
    return rows


def check_laplace(rows, n_se=3.0) -> CheckResult:
    worst = max(abs(a - m) / se if se > 0 else (0.0 if a == m else math.inf) for _, _, _, a, m, se in rows)
    return CheckResult("Laplace transforms", worst <= n_se, f"max |diff|/SE={worst:.2f} over {len(rows)} cases")


def check_beta_monotone(cfg: ScenarioConfig, n=20, model_tol=1e-9) -> CheckResult:
    """Coverage over a beta grid, each point a fresh analytic model."""
    bmax = beta_upper_bound(cfg)
    betas = np.linspace(0.0, 0.95 * bmax, n)
    vals = np.array([AnalyticModel(cfg.replace(beta=float(b))).coverage_probability() for b in betas])
    drops = np.diff(vals)
    ok = bool(np.all(drops >= -model_tol))
    return CheckResult("coverage nondecreasing in beta", ok,
                       f"{n} points, min step={drops.min():.2e}, range {vals[0]:.4f}..{vals[-1]:.4f}")


def check_g_monotone(n=100) -> CheckResult:
    x = np.geomspace(1e-3, 10.0, n)
    g = g_ratio(x)
    ok = bool(np.all(np.diff(g) < 0))
    return CheckResult("x exp(-x^2)/erf(x) decreasing", ok, f"{n}-point log grid on [1e-3, 10]")


def perturbed_configs(cfg: ScenarioConfig):
    """Default plus eight single and combined perturbations of (M_B, k_B, T, SNR)."""
    db = lambda v: 10 ** (v / 10)
    changes = [
        dict(m_b=2), dict(m_b=32), dict(k_b=0.5), dict(frame_len=8960.0),
        dict(snr=db(6)), dict(snr=db(26)),
        dict(m_b=2, k_b=0.5, frame_len=8960.0, snr=db(6)),
        dict(m_b=32, k_b=0.5, frame_len=8960.0, snr=db(26)),
    ]
    return [cfg] + [cfg.replace(**c) for c in changes]


def check_beta_root_scan(cfgs, tol=1e-3) -> CheckResult:
    worst, bad = 0.0, []
    for c in cfgs:
        p = BetaProblem(c)
        r, s = p.root(), p.scan()
        gap = abs(r.beta_star - s.beta_star)
        worst = max(worst, gap)
        if gap > tol or (r.method == "root" and abs(r.residual) > 1e-8):
            bad.append((c.m_b, c.k_b, c.frame_len, round(10 * math.log10(c.snr), 2)))
    return CheckResult("beta* root vs golden-section", not bad,
                       f"{len(cfgs)} configs, max gap={worst:.2e}" + (f", failing {bad}" if bad else ""))


def run_all(cfg: ScenarioConfig, n_trials=100_000, seed=1, threads=None, progress=None):
    """Full oracle suite; returns a list of CheckResult."""
    model = AnalyticModel(cfg)
    sim = Simulator(cfg, "per_link")
    rec = sim.run(n_trials, seed, threads)
    out = [
        check_distance_law(model, rec),
        check_association(model, rec),
        check_laplace(laplace_table(model, sim, n_trials, seed + 1, threads=threads)),
        check_coverage(model, sim, rec),
        check_ase_ee(model, sim, rec),
        check_beta_monotone(cfg),
        check_g_monotone(),
        check_beta_root_scan(perturbed_configs(cfg)),
    ]
    if progress:
        for r in out:
            progress(r.line())
    return out
