# cython: language_level=3, boundscheck=False, wraparound=False, cdivision=True, initializedcheck=False
"""Compiled Monte Carlo trial kernels.

Mirrors ``_pykernels`` draw for draw; every random number is a pure function
of (trial key, stream, index), so chunks can run on any thread in any order.
"""
from libc.math cimport exp, log, sqrt, cos, acos, pow, fabs, INFINITY, M_PI
from libc.stdlib cimport realloc, free
from libc.stdint cimport uint64_t, int64_t, int8_t

cdef uint64_t GOLDEN = 0x9E3779B97F4A7C15ULL

cdef enum:
    P_LAM_B = 0
    P_LAM_R = 1
    P_ETA = 2
    P_ALPHA = 3
    P_GAMMA = 4
    P_RADIUS = 5
    P_Q = 6
    P_SERV = 7
    P_NN = 8
    P_N0 = 9

cdef enum:
    S_MISC = 0
    S_BS_R = 1
    S_BS_PHI = 2
    S_BS_LOS = 3
    S_BS_NCAND = 4
    S_D_COIN = 5
    S_D_FADE = 6
    S_C_SEG = 7
    S_C_E1 = 8
    S_C_E2 = 9
    S_C_PSI = 10
    S_C_ACC = 11
    S_R_COIN = 12
    S_R_FADE = 13
    S_RIS_E1 = 20
    S_RIS_E2 = 21
    S_RIS_PHI = 22
    S_PAIR_LOS = 23
    S_PAIR_FEAS = 24
    S_BS_COIN = 25
    S_PAIR_FADE = 26


cdef inline uint64_t mix64(uint64_t z) noexcept nogil:
    z = (z ^ (z >> 30)) * 0xBF58476D1CE4E5B9ULL
    z = (z ^ (z >> 27)) * 0x94D049BB133111EBULL
    return z ^ (z >> 31)


cdef inline double unif(uint64_t key, uint64_t stream, uint64_t idx) noexcept nogil:
    cdef uint64_t z = key + ((stream << 48) + idx + 1) * GOLDEN
    return (<double>(mix64(z) >> 12) + 0.5) * 2.220446049250313e-16


cdef inline int64_t table_draw(const double[::1] cdf, double u) noexcept nogil:
    # searchsorted(cdf, u, side='right'), capped at the last index
    cdef int64_t lo = 0, hi = cdf.shape[0], mid
    while lo < hi:
        mid = (lo + hi) >> 1
        if cdf[mid] <= u:
            lo = mid + 1
        else:
            hi = mid
    if lo > cdf.shape[0] - 1:
        lo = cdf.shape[0] - 1
    return lo


cdef inline int64_t poisson_small(double u, double mean) noexcept nogil:
    cdef int64_t k = 0
    cdef double p = exp(-mean)
    cdef double c = p
    while c < u:
        k += 1
        p *= mean / k
        if p == 0.0:
            break
        c += p
    return k


cdef inline double feas(double u, double t, double cp, double dbr) noexcept nogil:
    cdef double arg = 1.0
    if dbr > 0.0:
        arg = (t - u * cp) / dbr
    if arg > 1.0:
        arg = 1.0
    if arg < -1.0:
        arg = -1.0
    return 0.5 * (1.0 - acos(arg) / M_PI)


cdef struct Scratch:
    int64_t nb_cap
    double* bs_r
    double* bs_phi
    char* bs_los
    char* bs_coin
    int64_t* order
    int64_t np_cap
    int64_t* p_bs
    double* p_len
    int64_t* p_ctr
    int64_t nr_cap
    double* ris_t
    double* ris_phi
    int64_t* ris_k


cdef int grow_bs(Scratch* s, int64_t n) noexcept nogil:
    if n <= s.nb_cap:
        return 0
    n = n + n // 2 + 16
    s.bs_r = <double*> realloc(s.bs_r, n * sizeof(double))
    s.bs_phi = <double*> realloc(s.bs_phi, n * sizeof(double))
    s.bs_los = <char*> realloc(s.bs_los, n * sizeof(char))
    s.bs_coin = <char*> realloc(s.bs_coin, n * sizeof(char))
    s.order = <int64_t*> realloc(s.order, n * sizeof(int64_t))
    if s.bs_r == NULL or s.bs_phi == NULL or s.bs_los == NULL or s.bs_coin == NULL or s.order == NULL:
        return -1
    s.nb_cap = n
    return 0


cdef int grow_paths(Scratch* s, int64_t n) noexcept nogil:
    if n <= s.np_cap:
        return 0
    n = n + n // 2 + 64
    s.p_bs = <int64_t*> realloc(s.p_bs, n * sizeof(int64_t))
    s.p_len = <double*> realloc(s.p_len, n * sizeof(double))
    s.p_ctr = <int64_t*> realloc(s.p_ctr, n * sizeof(int64_t))
    if s.p_bs == NULL or s.p_len == NULL or s.p_ctr == NULL:
        return -1
    s.np_cap = n
    return 0


cdef int grow_ris(Scratch* s, int64_t n) noexcept nogil:
    if n <= s.nr_cap:
        return 0
    n = n + n // 2 + 16
    s.ris_t = <double*> realloc(s.ris_t, n * sizeof(double))
    s.ris_phi = <double*> realloc(s.ris_phi, n * sizeof(double))
    s.ris_k = <int64_t*> realloc(s.ris_k, n * sizeof(int64_t))
    if s.ris_t == NULL or s.ris_phi == NULL or s.ris_k == NULL:
        return -1
    s.nr_cap = n
    return 0


cdef void release(Scratch* s) noexcept nogil:
    free(s.bs_r); free(s.bs_phi); free(s.bs_los); free(s.bs_coin); free(s.order)
    free(s.p_bs); free(s.p_len); free(s.p_ctr)
    free(s.ris_t); free(s.ris_phi); free(s.ris_k)


cdef int64_t sample_bs(Scratch* s, const double[::1] prm, const double[::1] cdf_b, uint64_t key) noexcept nogil:
    cdef int64_t nb = 0, i
    cdef double eta = prm[P_ETA], radius = prm[P_RADIUS]
    if prm[P_LAM_B] > 0:
        nb = table_draw(cdf_b, unif(key, S_MISC, 0))
    if grow_bs(s, nb) < 0:
        return -1
    for i in range(nb):
        s.bs_r[i] = radius * sqrt(unif(key, S_BS_R, i))
        s.bs_phi[i] = 2.0 * M_PI * unif(key, S_BS_PHI, i)
        s.bs_los[i] = unif(key, S_BS_LOS, i) < exp(-eta * s.bs_r[i])
    return nb


cdef int64_t per_link_paths(Scratch* s, const double[::1] prm, uint64_t key, int64_t nb) noexcept nogil:
    """Candidate RISs per BS from a dominating field, thinned to usable paths."""
    cdef double lam_r = prm[P_LAM_R], eta = prm[P_ETA]
    cdef double u, w1, w2, w3, wsum, mean, v, e1, e2, t, psi, cp, dbr, pf
    cdef int64_t i, n, j, c = 0, npaths = 0
    if lam_r <= 0:
        return 0
    w3 = 1.0 / (4.0 * eta * eta)
    for i in range(nb):
        u = s.bs_r[i]
        w1 = u * u / 2.0
        w2 = u / (2.0 * eta)
        wsum = w1 + w2 + w3
        mean = lam_r * M_PI * exp(-eta * u) * wsum
        n = poisson_small(unif(key, S_BS_NCAND, i), mean)
        for j in range(n):
            v = unif(key, S_C_SEG, c) * wsum
            e1 = unif(key, S_C_E1, c)
            e2 = unif(key, S_C_E2, c)
            if v < w1:
                t = u * sqrt(e1)
            elif v < w1 + w2:
                t = u - log(e1) / (2.0 * eta)
            else:
                t = u - (log(e1) + log(e2)) / (2.0 * eta)
            psi = M_PI * (2.0 * unif(key, S_C_PSI, c) - 1.0)
            cp = cos(psi)
            dbr = sqrt(max(u * u + t * t - 2.0 * u * t * cp, 0.0))
            pf = feas(u, t, cp, dbr)
            if unif(key, S_C_ACC, c) < 2.0 * pf * exp(-eta * (dbr - fabs(u - t))):
                if grow_paths(s, npaths + 1) < 0:
                    return -1
                s.p_bs[npaths] = i
                s.p_len[npaths] = t + dbr
                s.p_ctr[npaths] = c
                npaths += 1
            c += 1
    return npaths


cdef int64_t los_riss(Scratch* s, const double[::1] prm, const double[::1] cdf_r, uint64_t key,
                      int64_t* n_all) noexcept nogil:
    cdef double eta = prm[P_ETA], radius = prm[P_RADIUS], t
    cdef int64_t n, k, kept = 0
    n_all[0] = 0
    if prm[P_LAM_R] <= 0:
        return 0
    n = table_draw(cdf_r, unif(key, S_MISC, 3))
    if grow_ris(s, n) < 0:
        return -1
    for k in range(n):
        t = -(log(unif(key, S_RIS_E1, k)) + log(unif(key, S_RIS_E2, k))) / eta
        if t <= radius:
            s.ris_t[kept] = t
            s.ris_phi[kept] = 2.0 * M_PI * unif(key, S_RIS_PHI, k)
            s.ris_k[kept] = k
            kept += 1
    if kept > 0:
        n_all[0] = s.ris_k[kept - 1] + 1
    return kept


cdef int64_t per_bs_paths(Scratch* s, const double[::1] prm, uint64_t key, int64_t nb, int64_t nr,
                          int64_t n_all, double* best_blocked) noexcept nogil:
    """Usable (BS, RIS) pairs with shared RISs.

    Only pairs that can matter are visited: every pair of a BS whose
    interference coin is on, and pairs of blocked BSs that could still hold
    the shortest reflected path.  BSs are visited nearest first, so the
    search stops once the BS distance alone exceeds the best path found.
    """
    cdef double eta = prm[P_ETA], q = prm[P_Q]
    cdef double u, phi, cp, dbr, t, d, best = INFINITY
    cdef int64_t i, k, o, ctr, npaths = 0
    cdef int want
    for i in range(nb):
        s.bs_coin[i] = unif(key, S_BS_COIN, i) < q
        s.order[i] = i
    sort_indices(s.order, s.bs_r, nb)
    for o in range(nb):
        i = s.order[o]
        u = s.bs_r[i]
        want = s.bs_coin[i] or (not s.bs_los[i] and u < best)
        if not want:
            continue
        phi = s.bs_phi[i]
        for k in range(nr):
            t = s.ris_t[k]
            cp = cos(s.ris_phi[k] - phi)
            dbr = sqrt(max(u * u + t * t - 2.0 * u * t * cp, 0.0))
            ctr = i * n_all + s.ris_k[k]
            if not unif(key, S_PAIR_LOS, ctr) < exp(-eta * dbr):
                continue
            if not unif(key, S_PAIR_FEAS, ctr) < feas(u, t, cp, dbr):
                continue
            d = t + dbr
            if grow_paths(s, npaths + 1) < 0:
                return -1
            s.p_bs[npaths] = i
            s.p_len[npaths] = d
            s.p_ctr[npaths] = ctr
            npaths += 1
            if not s.bs_los[i] and d < best:
                best = d
    best_blocked[0] = best
    return npaths


cdef void sort_indices(int64_t* idx, double* key, int64_t n) noexcept nogil:
    # insertion sort for short runs, otherwise a heap sort; both in place
    cdef int64_t i, j, tmp, root, child, end
    if n < 32:
        for i in range(1, n):
            tmp = idx[i]
            j = i - 1
            while j >= 0 and (key[idx[j]] > key[tmp] or (key[idx[j]] == key[tmp] and idx[j] > tmp)):
                idx[j + 1] = idx[j]
                j -= 1
            idx[j + 1] = tmp
        return
    for i in range(n // 2 - 1, -1, -1):
        sift(idx, key, i, n)
    end = n - 1
    while end > 0:
        tmp = idx[0]; idx[0] = idx[end]; idx[end] = tmp
        sift(idx, key, 0, end)
        end -= 1


cdef inline bint before(int64_t a, int64_t b, double* key) noexcept nogil:
    return key[a] < key[b] or (key[a] == key[b] and a < b)


cdef void sift(int64_t* idx, double* key, int64_t root, int64_t n) noexcept nogil:
    cdef int64_t child, tmp
    while True:
        child = 2 * root + 1
        if child >= n:
            return
        if child + 1 < n and before(idx[child], idx[child + 1], key):
            child += 1
        if before(idx[root], idx[child], key):
            tmp = idx[root]; idx[root] = idx[child]; idx[child] = tmp
            root = child
        else:
            return


cdef int run_trial(Scratch* s, const double[::1] prm, const double[::1] cdf_b, const double[::1] cdf_r,
                   uint64_t key, int mode, int8_t* kind, double* sinr, double* r_dir,
                   double* r_ref, double* plo) noexcept nogil:
    cdef double alpha = prm[P_ALPHA], gamma = prm[P_GAMMA], q = prm[P_Q], nn = prm[P_NN]
    cdef int64_t nb, npaths, nr, n_all = 0, i, j, best_d = -1, best_p = -1, star
    cdef double bd = INFINITY, bb = INFINITY, pl_d, pl_r, pl, interf, g, h
    nb = sample_bs(s, prm, cdf_b, key)
    if nb < 0:
        return -1
    for i in range(nb):
        if s.bs_los[i] and s.bs_r[i] < bd:
            bd = s.bs_r[i]
            best_d = i
    if mode == 0:
        npaths = per_link_paths(s, prm, key, nb)
        if npaths < 0:
            return -1
        for j in range(npaths):
            if not s.bs_los[s.p_bs[j]] and s.p_len[j] < bb:
                bb = s.p_len[j]
                best_p = j
    else:
        nr = los_riss(s, prm, cdf_r, key, &n_all)
        if nr < 0:
            return -1
        npaths = per_bs_paths(s, prm, key, nb, nr, n_all, &bb)
        if npaths < 0:
            return -1
        for j in range(npaths):
            if not s.bs_los[s.p_bs[j]] and s.p_len[j] == bb:
                best_p = j
                break
    r_dir[0] = bd
    r_ref[0] = bb
    if best_d < 0 and best_p < 0:
        kind[0] = 2
        sinr[0] = 0.0
        plo[0] = 0.0
        return 0
    pl_d = pow(bd, -alpha) if best_d >= 0 else 0.0
    pl_r = gamma * pow(bb, -alpha) if best_p >= 0 else 0.0
    if best_d >= 0 and pl_d >= pl_r:
        kind[0] = 0
        star = best_d
        pl = pl_d
    else:
        kind[0] = 1
        star = s.p_bs[best_p]
        pl = pl_r
    plo[0] = pl
    interf = 0.0
    for i in range(nb):
        if i == star or not s.bs_los[i]:
            continue
        if mode == 0:
            if not unif(key, S_D_COIN, i) < q:
                continue
        elif not s.bs_coin[i]:
            continue
        interf += nn * pow(s.bs_r[i], -alpha) * -log(unif(key, S_D_FADE, i))
    for j in range(npaths):
        if s.p_bs[j] == star:
            continue
        if mode == 0:
            if not unif(key, S_R_COIN, s.p_ctr[j]) < q:
                continue
            h = -log(unif(key, S_R_FADE, s.p_ctr[j]))
        else:
            if not s.bs_coin[s.p_bs[j]]:
                continue
            h = -log(unif(key, S_PAIR_FADE, s.p_ctr[j]))
        interf += nn * gamma * pow(s.p_len[j], -alpha) * h
    g = nn if unif(key, S_MISC, 1) < prm[P_SERV] else 0.0
    h = -log(unif(key, S_MISC, 2))
    sinr[0] = g * h * pl / (prm[P_N0] + interf)
    return 0


def simulate_chunk(const double[::1] prm, const double[::1] cdf_b, const double[::1] cdf_r,
                   uint64_t seed_key, int64_t start, int64_t stop, int mode,
                   int8_t[::1] kind, double[::1] sinr, double[::1] r_dir, double[::1] r_ref,
                   double[::1] pl):
    """Run trials [start, stop) and write results at the same indices."""
    cdef Scratch s
    cdef int64_t t
    cdef uint64_t key
    cdef int err = 0
    s.nb_cap = 0; s.np_cap = 0; s.nr_cap = 0
    s.bs_r = NULL; s.bs_phi = NULL; s.bs_los = NULL; s.bs_coin = NULL; s.order = NULL
    s.p_bs = NULL; s.p_len = NULL; s.p_ctr = NULL
    s.ris_t = NULL; s.ris_phi = NULL; s.ris_k = NULL
    with nogil:
        for t in range(start, stop):
            key = mix64(seed_key + <uint64_t>(t + 1) * GOLDEN)
            if run_trial(&s, prm, cdf_b, cdf_r, key, mode, &kind[t], &sinr[t], &r_dir[t],
                         &r_ref[t], &pl[t]) < 0:
                err = 1
                break
        release(&s)
    if err:
        raise MemoryError("trial scratch allocation failed")


def interference_chunk(const double[::1] prm, const double[::1] cdf_b, uint64_t seed_key,
                       int64_t start, int64_t stop, const double[::1] a_dir,
                       const double[::1] b_ref, double[:, ::1] out_d, double[:, ::1] out_r):
    """Per-link interference sums outside exclusion radii (no serving BS)."""
    cdef Scratch s
    cdef int64_t t, i, j, k, nb, npaths, nk = a_dir.shape[0]
    cdef uint64_t key
    cdef double alpha = prm[P_ALPHA], gamma = prm[P_GAMMA], q = prm[P_Q], nn = prm[P_NN], term
    cdef int err = 0
    s.nb_cap = 0; s.np_cap = 0; s.nr_cap = 0
    s.bs_r = NULL; s.bs_phi = NULL; s.bs_los = NULL; s.bs_coin = NULL; s.order = NULL
    s.p_bs = NULL; s.p_len = NULL; s.p_ctr = NULL
    s.ris_t = NULL; s.ris_phi = NULL; s.ris_k = NULL
    with nogil:
        for t in range(start, stop):
            key = mix64(seed_key + <uint64_t>(t + 1) * GOLDEN)
            nb = sample_bs(&s, prm, cdf_b, key)
            npaths = per_link_paths(&s, prm, key, nb) if nb >= 0 else -1
            if nb < 0 or npaths < 0:
                err = 1
                break
            for k in range(nk):
                out_d[t, k] = 0.0
                out_r[t, k] = 0.0
            for i in range(nb):
                if not s.bs_los[i] or not unif(key, S_D_COIN, i) < q:
                    continue
                term = nn * pow(s.bs_r[i], -alpha) * -log(unif(key, S_D_FADE, i))
                for k in range(nk):
                    if s.bs_r[i] > a_dir[k]:
                        out_d[t, k] += term
            for j in range(npaths):
                if not unif(key, S_R_COIN, s.p_ctr[j]) < q:
                    continue
                term = nn * gamma * pow(s.p_len[j], -alpha) * -log(unif(key, S_R_FADE, s.p_ctr[j]))
                for k in range(nk):
                    if s.p_len[j] >= b_ref[k]:
                        out_r[t, k] += term
        release(&s)
    if err:
        raise MemoryError("trial scratch allocation failed")
