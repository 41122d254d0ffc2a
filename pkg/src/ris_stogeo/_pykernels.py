"""Reference (numpy) implementation of one Monte Carlo trial.

The compiled kernel in ``_kernels.pyx`` follows this code step for step and
draws from the same keyed streams, so both produce the same networks.
"""
from __future__ import annotations

import math
from dataclasses import dataclass, field

import numpy as np

from .rng import poisson_from_table, trial_keys, uniforms

# parameter vector layout shared with the compiled kernel
P_LAM_B, P_LAM_R, P_ETA, P_ALPHA, P_GAMMA, P_RADIUS, P_Q, P_SERV, P_NN, P_N0 = range(10)
N_PARAMS = 10

MODE_PER_LINK = 0
MODE_PER_BS = 1

KIND_DIRECT, KIND_REFLECTED, KIND_OUTAGE = 0, 1, 2

# stream ids
S_MISC = 0          # 0: BS count, 1: serving gain coin, 2: serving fading, 3: RIS count
S_BS_R, S_BS_PHI, S_BS_LOS, S_BS_NCAND = 1, 2, 3, 4
S_D_COIN, S_D_FADE = 5, 6
S_C_SEG, S_C_E1, S_C_E2, S_C_PSI, S_C_ACC = 7, 8, 9, 10, 11
S_R_COIN, S_R_FADE = 12, 13
S_RIS_E1, S_RIS_E2, S_RIS_PHI = 20, 21, 22
S_PAIR_LOS, S_PAIR_FEAS, S_BS_COIN, S_PAIR_FADE = 23, 24, 25, 26


@dataclass
class Trial:
    """One sampled network around the typical user.

    Paths are the usable reflected links (all three indicators equal to 1).
    In per-link mode each BS owns an independent field of candidate RISs and
    ``path_ris`` is -1; in per-BS mode RISs are shared and ``path_ris``
    indexes ``ris_t``/``ris_phi``.
    """
    key: int
    bs_r: np.ndarray
    bs_phi: np.ndarray
    bs_los: np.ndarray
    ris_t: np.ndarray
    ris_phi: np.ndarray
    path_bs: np.ndarray
    path_ris: np.ndarray
    path_len: np.ndarray
    path_ctr: np.ndarray       # stream index of each path's coin and fading
    mode: int = MODE_PER_LINK
    extras: dict = field(default_factory=dict)


def _poisson_small(u: np.ndarray, mean: np.ndarray) -> np.ndarray:
    """Vectorised sequential inversion, same recursion as the compiled code."""
    k = np.zeros(u.shape, dtype=np.int64)
    p = np.exp(-mean)
    cdf = p.copy()
    active = cdf < u
    kk = 0
    while np.any(active):
        kk += 1
        p = np.where(active, p * mean / kk, p)
        stop = active & (p == 0.0)
        k[active] = kk
        cdf = np.where(active & ~stop, cdf + p, cdf)
        active = active & ~stop & (cdf < u)
    return k


def realize(prm, cdf_b, cdf_r, key, mode: int) -> Trial:
    key = np.uint64(key)
    lam_r, eta = prm[P_LAM_R], prm[P_ETA]
    radius = prm[P_RADIUS]
    nb = int(poisson_from_table(cdf_b, uniforms(key, S_MISC, [0]))[0]) if prm[P_LAM_B] > 0 else 0
    ib = np.arange(nb)
    r = radius * np.sqrt(uniforms(key, S_BS_R, ib))
    phi = 2.0 * np.pi * uniforms(key, S_BS_PHI, ib)
    los = uniforms(key, S_BS_LOS, ib) < np.exp(-eta * r)
    empty_f = np.zeros(0)
    empty_i = np.zeros(0, dtype=np.int64)
    if mode == MODE_PER_LINK:
        if lam_r > 0 and nb > 0:
            pb, pl, pc = _per_link_paths(key, r, lam_r, eta)
        else:
            pb, pl, pc = empty_i, empty_f, empty_i
        return Trial(int(key), r, phi, los, empty_f, empty_f, pb, np.full(len(pb), -1), pl, pc, mode)
    t, rphi, kall = _los_riss(key, cdf_r, lam_r, eta, radius)
    pb, pr, pl, pc = _per_bs_paths(key, r, phi, t, rphi, kall, eta)
    return Trial(int(key), r, phi, los, t, rphi, pb, pr, pl, pc, mode)


def _per_link_paths(key, r, lam_r, eta):
    w1 = r * r / 2.0
    w2 = r / (2.0 * eta)
    w3 = 1.0 / (4.0 * eta * eta)
    wsum = w1 + w2 + w3
    mean = lam_r * np.pi * np.exp(-eta * r) * wsum
    n = _poisson_small(uniforms(key, S_BS_NCAND, np.arange(len(r))), mean)
    total = int(n.sum())
    if total == 0:
        return np.zeros(0, dtype=np.int64), np.zeros(0), np.zeros(0, dtype=np.int64)
    owner = np.repeat(np.arange(len(r)), n)
    c = np.arange(total)
    u = r[owner]
    v = uniforms(key, S_C_SEG, c) * wsum[owner]
    e1 = uniforms(key, S_C_E1, c)
    e2 = uniforms(key, S_C_E2, c)
    inner = v < w1[owner]
    mid = ~inner & (v < (w1 + w2)[owner])
    t = np.where(inner, u * np.sqrt(e1),
                 np.where(mid, u - np.log(e1) / (2.0 * eta),
                          u - (np.log(e1) + np.log(e2)) / (2.0 * eta)))
    psi = np.pi * (2.0 * uniforms(key, S_C_PSI, c) - 1.0)
    cp = np.cos(psi)
    dbr = np.sqrt(np.maximum(u * u + t * t - 2.0 * u * t * cp, 0.0))
    with np.errstate(invalid="ignore", divide="ignore"):
        arg = np.where(dbr > 0.0, (t - u * cp) / dbr, 1.0)
    arg = np.minimum(1.0, np.maximum(-1.0, arg))
    pf = 0.5 * (1.0 - np.arccos(arg) / np.pi)
    acc = uniforms(key, S_C_ACC, c) < 2.0 * pf * np.exp(-eta * (dbr - np.abs(u - t)))
    return owner[acc], (t + dbr)[acc], c[acc]


def _los_riss(key, cdf_r, lam_r, eta, radius):
    if lam_r <= 0:
        return np.zeros(0), np.zeros(0), np.zeros(0, dtype=np.int64)
    n = int(poisson_from_table(cdf_r, uniforms(key, S_MISC, [3]))[0])
    k = np.arange(n)
    # radial law of RISs with an unobstructed link to the user is Gamma(2, eta)
    t = -(np.log(uniforms(key, S_RIS_E1, k)) + np.log(uniforms(key, S_RIS_E2, k))) / eta
    phi = 2.0 * np.pi * uniforms(key, S_RIS_PHI, k)
    keep = t <= radius
    return t[keep], phi[keep], k[keep]


def _per_bs_paths(key, r, phi, t, rphi, kall, eta):
    nb, nr = len(r), len(t)
    if nb == 0 or nr == 0:
        z = np.zeros(0, dtype=np.int64)
        return z, z, np.zeros(0), z
    n_all = int(kall[-1]) + 1
    u = r[:, None]
    cp = np.cos(rphi[None, :] - phi[:, None])
    tt = t[None, :]
    dbr = np.sqrt(np.maximum(u * u + tt * tt - 2.0 * u * tt * cp, 0.0))
    ctr = np.arange(nb)[:, None] * n_all + kall[None, :]
    los = uniforms(key, S_PAIR_LOS, ctr) < np.exp(-eta * dbr)
    with np.errstate(invalid="ignore", divide="ignore"):
        arg = np.where(dbr > 0.0, (tt - u * cp) / dbr, 1.0)
    arg = np.minimum(1.0, np.maximum(-1.0, arg))
    pf = 0.5 * (1.0 - np.arccos(arg) / np.pi)
    ok = los & (uniforms(key, S_PAIR_FEAS, ctr) < pf)
    bi, ki = np.nonzero(ok)
    return bi, ki, (tt + dbr)[ok], ctr[ok]


def associate(trial: Trial, prm):
    """(kind, serving BS, serving path or -1, serving path loss)."""
    alpha, gamma = prm[P_ALPHA], prm[P_GAMMA]
    los_idx = np.flatnonzero(trial.bs_los)
    best_d = -1
    if len(los_idx):
        best_d = int(los_idx[np.argmin(trial.bs_r[los_idx])])
    best_p = int(np.argmin(trial.path_len)) if len(trial.path_len) else -1
    if best_d < 0 and best_p < 0:
        return KIND_OUTAGE, -1, -1, 0.0
    pl_d = math.pow(float(trial.bs_r[best_d]), -alpha) if best_d >= 0 else 0.0
    pl_r = gamma * math.pow(float(trial.path_len[best_p]), -alpha) if best_p >= 0 else 0.0
    if best_d >= 0 and pl_d >= pl_r:
        return KIND_DIRECT, best_d, -1, pl_d
    return KIND_REFLECTED, int(trial.path_bs[best_p]), best_p, pl_r


def interference(trial: Trial, prm, serving_bs: int) -> float:
    key = np.uint64(trial.key)
    alpha, gamma, q, nn = prm[P_ALPHA], prm[P_GAMMA], prm[P_Q], prm[P_NN]
    nb = len(trial.bs_r)
    ib = np.arange(nb)
    if trial.mode == MODE_PER_LINK:
        d_on = uniforms(key, S_D_COIN, ib) < q
        p_on = uniforms(key, S_R_COIN, trial.path_ctr) < q
        p_fade = -np.log(uniforms(key, S_R_FADE, trial.path_ctr))
    else:
        d_on = uniforms(key, S_BS_COIN, ib) < q
        p_on = d_on[trial.path_bs]
        p_fade = -np.log(uniforms(key, S_PAIR_FADE, trial.path_ctr))
    d_on = d_on & trial.bs_los & (ib != serving_bs)
    p_on = p_on & (trial.path_bs != serving_bs)
    idx = np.flatnonzero(d_on)
    tot = 0.0
    for i in idx:
        tot += nn * math.pow(float(trial.bs_r[i]), -alpha) * -math.log(float(uniforms(key, S_D_FADE, [i])[0]))
    for j in np.flatnonzero(p_on):
        tot += nn * gamma * math.pow(float(trial.path_len[j]), -alpha) * float(p_fade[j])
    return tot


def sinr(trial: Trial, prm, assoc) -> float:
    kind, star, _, pl = assoc
    if kind == KIND_OUTAGE:
        return 0.0
    key = np.uint64(trial.key)
    u = uniforms(key, S_MISC, [1, 2])
    g = prm[P_NN] if u[0] < prm[P_SERV] else 0.0
    h = -math.log(float(u[1]))
    return g * h * pl / (prm[P_N0] + interference(trial, prm, star))


def link_records(trial: Trial):
    """Shortest LoS direct distance and shortest reflected path via a blocked BS."""
    los = trial.bs_los
    rd = float(trial.bs_r[los].min()) if np.any(los) else math.inf
    if len(trial.path_len):
        blocked = ~trial.bs_los[trial.path_bs]
        rr = float(trial.path_len[blocked].min()) if np.any(blocked) else math.inf
    else:
        rr = math.inf
    return rd, rr


def simulate_chunk(prm, cdf_b, cdf_r, seed, start, stop, mode, kind, snr, r_dir, r_ref, pl):
    keys = trial_keys(seed, np.arange(start, stop))
    for j, key in enumerate(keys):
        tr = realize(prm, cdf_b, cdf_r, key, mode)
        a = associate(tr, prm)
        o = start + j
        kind[o] = a[0]
        pl[o] = a[3]
        snr[o] = sinr(tr, prm, a)
        r_dir[o], r_ref[o] = link_records(tr)


def interference_chunk(prm, cdf_b, seed, start, stop, a_dir, b_ref, out_d, out_r):
    """Unconditioned per-link interference sums outside exclusion radii.

    For threshold j, ``out_d[:, j]`` sums direct terms from LoS BSs farther
    than ``a_dir[j]`` and ``out_r[:, j]`` sums reflected terms with path
    length at least ``b_ref[j]``.  No BS is excluded as serving.
    """
    alpha, gamma, q, nn = prm[P_ALPHA], prm[P_GAMMA], prm[P_Q], prm[P_NN]
    keys = trial_keys(seed, np.arange(start, stop))
    for j, key in enumerate(keys):
        tr = realize(prm, cdf_b, cdf_b, key, MODE_PER_LINK)
        ib = np.arange(len(tr.bs_r))
        d_on = (uniforms(key, S_D_COIN, ib) < q) & tr.bs_los
        dterm = np.where(d_on, nn * tr.bs_r ** -alpha * -np.log(uniforms(key, S_D_FADE, ib)), 0.0)
        p_on = uniforms(key, S_R_COIN, tr.path_ctr) < q
        pterm = np.where(p_on, nn * gamma * tr.path_len ** -alpha * -np.log(uniforms(key, S_R_FADE, tr.path_ctr)), 0.0)
        o = start + j
        for k in range(len(a_dir)):
            out_d[o, k] = dterm[tr.bs_r > a_dir[k]].sum()
            out_r[o, k] = pterm[tr.path_len >= b_ref[k]].sum()
