"""Monte Carlo simulation of the typical user, used as the oracle for every
analytic quantity.

Two independence modes are available.  ``per_link`` gives every BS its own
independent field of RISs and draws a separate beam-gain coin and fading
value for every interference term, which is exactly the independence used
by the analytic factorisation.  ``per_bs`` shares one RIS field between all
BSs, shares each RIS's user-side LoS indicator, and uses one gain coin per
interfering BS.
"""
from __future__ import annotations

import math
import os
from concurrent.futures import ThreadPoolExecutor
from dataclasses import dataclass
from enum import Enum

import numpy as np

from . import _pykernels as pyk
from .channel import beam_params, interferer_gain_probability, serving_gain_probability
from .params import ScenarioConfig, check_config, derive_params
from .rng import poisson_table, seed_key, trial_key

try:
    if os.environ.get("RIS_STOGEO_BACKEND", "").lower() == "python":
        raise ImportError("python backend requested")
    from . import _kernels as _ck
except ImportError:
    _ck = None

MODES = {"per_link": pyk.MODE_PER_LINK, "per_bs": pyk.MODE_PER_BS}
CHUNK = 1024


def backend_name() -> str:
    return "compiled" if _ck is not None else "python"


def _resolve_backend(backend: str | None):
    if backend in (None, "auto"):
        return _ck if _ck is not None else pyk
    if backend == "python":
        return pyk
    if backend == "compiled":
        if _ck is None:
            raise RuntimeError("compiled kernels are not available")
        return _ck
    raise ValueError(f"unknown backend {backend!r}")


def default_threads() -> int:
    env = os.environ.get("RIS_STOGEO_THREADS")
    if env:
        return max(1, int(env))
    return os.cpu_count() or 1


class LinkKind(Enum):
    DIRECT = pyk.KIND_DIRECT
    REFLECTED = pyk.KIND_REFLECTED
    OUTAGE = pyk.KIND_OUTAGE


@dataclass(frozen=True)
class AssociationOutcome:
    kind: LinkKind
    serving_bs: int | None
    serving_path: int | None
    serving_ris: int | None
    serving_path_loss: float


@dataclass(frozen=True)
class Estimate:
    value: float
    half_width: float


@dataclass(frozen=True)
class MetricEstimates:
    coverage: Estimate
    ase: Estimate
    ee: Estimate
    assoc_freq: tuple[float, float, float]
    n_trials: int


@dataclass(frozen=True)
class TrialRecords:
    """Per-trial outputs, indexed by trial number."""
    kind: np.ndarray
    sinr: np.ndarray
    r_direct: np.ndarray
    r_reflected: np.ndarray
    serving_path_loss: np.ndarray

    def arrays(self):
        return self.kind, self.sinr, self.r_direct, self.r_reflected, self.serving_path_loss


class Simulator:
    """Monte Carlo engine for one scenario."""

    def __init__(self, cfg: ScenarioConfig, mode: str = "per_link", radius: float | None = None,
                 eps_los: float = 1e-6, backend: str | None = None):
        check_config(cfg)
        if mode not in MODES:
            raise ValueError(f"mode must be one of {sorted(MODES)}")
        self.cfg = cfg
        self.dp = derive_params(cfg)
        self.mode = mode
        self.kernels = _resolve_backend(backend)
        r_max = math.log(1.0 / eps_los) / self.dp.eta
        self.radius = 1.25 * r_max if radius is None else float(radius)
        if self.radius < r_max:
            raise ValueError("simulation radius must be at least the truncation radius")
        bb, bu = beam_params(self.dp)
        prm = np.zeros(pyk.N_PARAMS)
        prm[pyk.P_LAM_B] = cfg.lambda_b
        prm[pyk.P_LAM_R] = self.dp.lambda_r
        prm[pyk.P_ETA] = self.dp.eta
        prm[pyk.P_ALPHA] = cfg.alpha
        prm[pyk.P_GAMMA] = cfg.gamma
        prm[pyk.P_RADIUS] = self.radius
        prm[pyk.P_Q] = interferer_gain_probability(bb, bu)
        prm[pyk.P_SERV] = serving_gain_probability(bb, bu)
        prm[pyk.P_NN] = self.dp.n_b * self.dp.n_u
        prm[pyk.P_N0] = cfg.n0
        self.prm = prm
        self.cdf_b = poisson_table(cfg.lambda_b * np.pi * self.radius ** 2)
        # user-visible RISs over the whole plane; those beyond the window are dropped
        self.cdf_r = poisson_table(2 * np.pi * self.dp.lambda_r / self.dp.eta ** 2)

    # ------------------------------------------------ single trials

    def realize_network(self, seed: int, trial: int = 0) -> pyk.Trial:
        return pyk.realize(self.prm, self.cdf_b, self.cdf_r, trial_key(seed, trial), MODES[self.mode])

    def associate(self, net: pyk.Trial) -> AssociationOutcome:
        kind, bs, path, pl = pyk.associate(net, self.prm)
        if kind == pyk.KIND_OUTAGE:
            return AssociationOutcome(LinkKind.OUTAGE, None, None, None, 0.0)
        if kind == pyk.KIND_DIRECT:
            return AssociationOutcome(LinkKind.DIRECT, bs, None, None, pl)
        ris = int(net.path_ris[path])
        return AssociationOutcome(LinkKind.REFLECTED, bs, path, ris if ris >= 0 else None, pl)

    def sample_sinr(self, net: pyk.Trial, assoc: AssociationOutcome) -> float:
        if assoc.kind is LinkKind.OUTAGE:
            return 0.0
        path = -1 if assoc.serving_path is None else assoc.serving_path
        raw = (assoc.kind.value, assoc.serving_bs, path, assoc.serving_path_loss)
        return pyk.sinr(net, self.prm, raw)

    # ------------------------------------------------ batches

    def _chunks(self, n: int):
        return [(s, min(s + CHUNK, n)) for s in range(0, n, CHUNK)]

    def run(self, n_trials: int, master_seed: int, threads: int | None = None) -> TrialRecords:
        """Simulate trials 0..n_trials-1; results do not depend on `threads`."""
        n = int(n_trials)
        kind = np.empty(n, dtype=np.int8)
        sinr = np.empty(n)
        r_dir = np.empty(n)
        r_ref = np.empty(n)
        pl = np.empty(n)
        mode = MODES[self.mode]
        k = self.kernels
        key = seed_key(master_seed) if k is _ck else master_seed

        def work(span):
            k.simulate_chunk(self.prm, self.cdf_b, self.cdf_r, key, span[0], span[1], mode,
                             kind, sinr, r_dir, r_ref, pl)

        _dispatch(work, self._chunks(n), threads)
        return TrialRecords(kind, sinr, r_dir, r_ref, pl)

    def interference_samples(self, n_trials: int, master_seed: int, a_direct, b_reflected,
                             threads: int | None = None):
        """Per-link interference sums with exclusion radii; see the kernels."""
        a = np.ascontiguousarray(a_direct, dtype=float)
        b = np.ascontiguousarray(b_reflected, dtype=float)
        n = int(n_trials)
        out_d = np.empty((n, len(a)))
        out_r = np.empty((n, len(b)))
        k = self.kernels
        key = seed_key(master_seed) if k is _ck else master_seed

        def work(span):
            k.interference_chunk(self.prm, self.cdf_b, key, span[0], span[1], a, b, out_d, out_r)

        _dispatch(work, self._chunks(n), threads)
        return out_d, out_r

    # ------------------------------------------------ metrics

    def power_density(self) -> float:
        return self.cfg.lambda_b * self.cfg.p_b + self.dp.lambda_r * self.cfg.p_r

    def metrics_from(self, rec: TrialRecords, tau: float | None = None) -> MetricEstimates:
        tau = self.cfg.tau if tau is None else tau
        n = len(rec.sinr)
        hit = rec.sinr > tau
        cov = float(hit.mean())
        cov_hw = 1.96 * math.sqrt(cov * (1 - cov) / n)
        scale = self.dp.t_d / self.cfg.frame_len * self.cfg.lambda_b
        rate = np.where(hit, np.log2(1.0 + rec.sinr), 0.0)
        ase = scale * float(rate.mean())
        ase_hw = scale * 1.96 * float(rate.std(ddof=1)) / math.sqrt(n)
        pw = self.power_density()
        freq = tuple(float(np.mean(rec.kind == k)) for k in (0, 1, 2))
        return MetricEstimates(Estimate(cov, cov_hw), Estimate(ase, ase_hw),
                               Estimate(ase / pw, ase_hw / pw), freq, n)

    def estimate_metrics(self, n_trials: int, master_seed: int, threads: int | None = None,
                         tau: float | None = None) -> MetricEstimates:
        if n_trials < 100:
            raise ValueError("need at least 100 trials")
        return self.metrics_from(self.run(n_trials, master_seed, threads), tau)

    def empirical_link_cdfs(self, n_trials: int, master_seed: int, grid=None, threads=None):
        """Empirical CDFs of the shortest LoS direct and reflected distances."""
        if n_trials < 10_000:
            raise ValueError("need at least 10^4 trials")
        rec = self.run(n_trials, master_seed, threads)
        if grid is None:
            grid = np.linspace(0.0, self.radius / 1.25, 401)
        grid = np.asarray(grid, dtype=float)
        fd = np.searchsorted(np.sort(rec.r_direct), grid, side="right") / n_trials
        fr = np.searchsorted(np.sort(rec.r_reflected), grid, side="right") / n_trials
        return grid, fd, fr


def _dispatch(work, spans, threads):
    threads = default_threads() if threads is None else max(1, int(threads))
    if threads == 1 or len(spans) == 1:
        for s in spans:
            work(s)
        return
    with ThreadPoolExecutor(max_workers=threads) as pool:
        for _ in pool.map(work, spans):
            pass


def ks_statistic(samples, cdf) -> float:
    """Sup distance between the empirical CDF of `samples` (inf allowed) and
    a possibly defective model CDF, evaluated at the sample jumps."""
    x = np.sort(np.asarray(samples, dtype=float))
    n = len(x)
    fin = x[np.isfinite(x)]
    f = cdf(fin)
    i = np.arange(1, len(fin) + 1)
    return float(max(np.max(np.abs(i / n - f)), np.max(np.abs((i - 1) / n - f))))


def estimate_metrics(cfg: ScenarioConfig, n_trials: int, master_seed: int,
                     threads: int | None = None, mode: str = "per_link") -> MetricEstimates:
    return Simulator(cfg, mode).estimate_metrics(n_trials, master_seed, threads)
