"""Compiled annual step loop.

Mirrors engine.step operation by operation (same ordering, same left-to-right
sums, same hashed tie-break keys) so a run is bit-identical to the pure-Python
reference, only much faster.
"""

import math

import numpy as np
from numba import njit

# parameter vector layout
PRM_FIELDS = (
    "alpha_m", "alpha_c", "symmetric_demand_feedback", "k", "f", "h", "lambda_max", "beta", "delta",
    "gamma", "nu", "T_max", "feed_coeff", "eps_max", "eps_min", "p", "natural_sign", "forest_threshold",
    "degraded_threshold", "organic_chemical_intensity", "organic_density_cap_in_integrity", "phi",
    "zeta_plus_c", "zeta_plus_m", "zeta_minus_c", "zeta_minus_m", "expansion_restriction_c",
    "expansion_restriction_m", "floor_mode", "lambda_cap_at_policy_year",
)
P = {name: i for i, name in enumerate(PRM_FIELDS)}

# run-state vector layout
STATE_FIELDS = ("T", "M", "Phi", "Lambda", "lambda_cap", "last_D_m", "last_Q_m", "last_D_c",
                "last_Q_c", "eps0_natural_sum", "saturation_events")
S = {name: i for i, name in enumerate(STATE_FIELDS)}

COLUMNS = (
    "D_m", "D_c_food", "D_feed", "D_c", "q_c", "q_c_org", "q_m", "q_m_org", "Q_c", "Q_m",
    "feed_scaling", "T", "M", "Phi", "Lambda", "E",
    "area_natural", "area_crop", "area_pasture", "area_forest", "area_degraded",
    "mean_eps_natural", "mean_eps_crop_conv", "mean_eps_crop_org", "mean_eps_pasture_conv",
    "mean_eps_pasture_org", "area_crop_org", "area_pasture_org",
    "expand_crop", "contract_crop", "expand_pasture", "contract_pasture",
    "degraded_natural", "degraded_crop", "degraded_pasture", "saturation_events",
)
C = {name: i for i, name in enumerate(COLUMNS)}

STREAM_ORGANIC = 1
STREAM_LAND = 2

# selection orders
HIGHEST_EPS = 0
LOWEST_EPS = 1
KEY_ONLY = 2


@njit(cache=True, nogil=True)
def splitmix(z):
    z = z + np.uint64(0x9E3779B97F4A7C15)
    z = (z ^ (z >> np.uint64(30))) * np.uint64(0xBF58476D1CE4E5B9)
    z = (z ^ (z >> np.uint64(27))) * np.uint64(0x94D049BB133111EB)
    return z ^ (z >> np.uint64(31))


@njit(cache=True, nogil=True)
def key_base(seed, step, stream):
    h = splitmix(np.uint64(seed))
    h = splitmix(h ^ np.uint64(step))
    return splitmix(h ^ np.uint64(stream))


@njit(cache=True, nogil=True)
def _before(e1, k1, e2, k2, order):
    if order == HIGHEST_EPS:
        return e1 > e2 or (e1 == e2 and k1 < k2)
    if order == LOWEST_EPS:
        return e1 < e2 or (e1 == e2 and k1 < k2)
    return k1 < k2


@njit(cache=True, nogil=True)
def select(lu, org, eps, base, cls, conv_only, k, order, idx, bk, be):
    """First k cells of class `cls` under `order`; fills idx[:m] and returns m."""
    if k <= 0:
        return 0
    m = 0
    for i in range(lu.size):
        if lu[i] != cls or (conv_only and org[i] != 0):
            continue
        key = splitmix(base + np.uint64(i))
        e = eps[i]
        if m == k:
            if not _before(e, key, be[k - 1], bk[k - 1], order):
                continue
            j = k - 1
        else:
            j = m
            m += 1
        while j > 0 and _before(e, key, be[j - 1], bk[j - 1], order):
            idx[j] = idx[j - 1]
            bk[j] = bk[j - 1]
            be[j] = be[j - 1]
            j -= 1
        idx[j] = i
        bk[j] = key
        be[j] = e
    return m


@njit(cache=True, nogil=True)
def land_change(gap, zeta_plus, zeta_minus, restriction, quantum, n_cells, phi, floor_mode):
    """(expand, contract) cell counts for a relative demand gap."""
    zp = zeta_plus * (1.0 - restriction) if gap > 0 else zeta_plus
    up = 1.0 + zp * gap
    down = 1.0 - zeta_minus * gap
    if floor_mode == 0:
        return quantum * max(0, int(math.floor(up))), quantum * max(0, int(math.floor(down)))
    return max(0, int(math.floor(phi * up * n_cells))), max(0, int(math.floor(phi * down * n_cells)))


@njit(cache=True, nogil=True)
def _feedback(last_D, last_Q, alpha, symmetric):
    if last_D == 0.0:
        return 1.0
    fb = 1.0 - alpha * (last_D - last_Q) / last_D
    fb = max(0.0, fb)
    if symmetric == 0.0:
        fb = min(1.0, fb)
    return fb


@njit(cache=True, nogil=True)
def simulate(lu, org, eps, thn, thc, thm, state, seed, t_from, t_to, meat_exo, food_exo,
             share_c, share_m, prm_pre, prm_post, policy_t, out):
    """Advance steps t_from..t_to-1 (each producing row t) in place."""
    n = lu.size
    idx = np.empty(n, np.int64)
    bk = np.empty(n, np.uint64)
    be = np.empty(n, np.float64)
    cnt = np.zeros(6, np.int64)
    s = np.zeros(6)
    T = state[0]
    M = state[1]
    Phi = state[2]
    Lam = state[3]
    lam_cap = state[4]
    last_Dm = state[5]
    last_Qm = state[6]
    last_Dc = state[7]
    last_Qc = state[8]
    eps0 = state[9]
    sat_total = state[10]
    for i in range(n):
        cnt[lu[i] * 2 + org[i]] += 1

    for t in range(t_from, t_to):
        prm = prm_post if t > policy_t else prm_pre
        alpha_m = prm[0]; alpha_c = prm[1]; sym = prm[2]; k = prm[3]; f = prm[4]; h = prm[5]
        lam_max = prm[6]; beta = prm[7]; delta = prm[8]; gamma = prm[9]; nu = prm[10]
        T_max = prm[11]; feed = prm[12]; eps_max = prm[13]; eps_min = prm[14]; p = prm[15]
        nat_sign = prm[16]; thr_forest = prm[17]; thr_deg = prm[18]; org_phi = prm[19]
        org_cap = prm[20]; phi = prm[21]; zpc = prm[22]; zpm = prm[23]; zmc = prm[24]; zmm = prm[25]
        rc = prm[26]; rm = prm[27]; floor_mode = int(prm[28]); cap_on = prm[29]

        # demand with shortfall feedback
        D_m = meat_exo[t] * _feedback(last_Dm, last_Qm, alpha_m, sym)
        D_food = food_exo[t] * _feedback(last_Dc, last_Qc, alpha_c, sym)
        # technology, livestock density
        T = T + nu * T * (1.0 - T / T_max)
        Lam = max(1.0, Lam + gamma * Lam * (D_m - last_Qm) / D_m)
        if cap_on != 0.0 and t > policy_t:
            Lam = min(Lam, lam_cap)

        # organic promotion
        base = key_base(seed, t, STREAM_ORGANIC)
        for cls in (1, 2):
            share = share_c[t] if cls == 1 else share_m[t]
            area = cnt[2 * cls] + cnt[2 * cls + 1]
            need = int(math.floor(share * area + 0.5)) - cnt[2 * cls + 1]
            if need > 0:
                m = select(lu, org, eps, base, cls, True, need, KEY_ONLY, idx, bk, be)
                for j in range(m):
                    org[idx[j]] = 1
                cnt[2 * cls] -= m
                cnt[2 * cls + 1] += m

        # mean integrities per land-use/management group
        s[:] = 0.0
        for i in range(n):
            s[lu[i] * 2 + org[i]] += eps[i]
        e_cc = s[2] / cnt[2] if cnt[2] > 0 else 1.0
        e_co = s[3] / cnt[3] if cnt[3] > 0 else 1.0
        e_pc = s[4] / cnt[4] if cnt[4] > 0 else 1.0
        e_po = s[5] / cnt[5] if cnt[5] > 0 else 1.0

        # planned meat, feed, crop inputs and output
        tech = 1.0 + T
        q_m = cnt[4] * tech * Lam ** h * e_pc ** (1.0 - h) if cnt[4] > 0 else 0.0
        q_mo = cnt[5] * tech * min(lam_max, Lam) ** h * e_po ** (1.0 - h) if cnt[5] > 0 else 0.0
        D_feed = feed * (q_m + q_mo)
        D_c = D_food + D_feed
        M = max(1.0, M + beta * M * (D_c - last_Qc) / D_c)
        Phi = max(1.0, Phi + delta * Phi * (D_c - last_Qc) / D_c)
        ec = 1.0 - k - f
        q_c = cnt[2] * tech * Phi ** k * M ** f * e_cc ** ec if cnt[2] > 0 else 0.0
        q_co = cnt[3] * tech * M ** f * e_co ** ec if cnt[3] > 0 else 0.0
        Q_c = q_c + q_co
        scale = 1.0 if D_c == 0.0 else min(1.0, Q_c / D_c)
        Q_m = (q_m + q_mo) * scale

        # land response: abandonment first, then conversion (crop before pasture)
        quantum = int(math.floor(phi * n + 0.5))
        exp_c, con_c = land_change((D_c - last_Qc) / D_c, zpc, zmc, rc, quantum, n, phi, floor_mode)
        exp_m, con_m = land_change((D_m - last_Qm) / D_m, zpm, zmm, rm, quantum, n, phi, floor_mode)
        base = key_base(seed, t, STREAM_LAND)
        for cls, kk in ((1, con_c), (2, con_m)):
            m = select(lu, org, eps, base, cls, False, kk, LOWEST_EPS, idx, bk, be)
            for j in range(m):
                i = idx[j]
                cnt[lu[i] * 2 + org[i]] -= 1
                lu[i] = 0
                org[i] = 0
                cnt[0] += 1
            if cls == 1:
                con_c = m
            else:
                con_m = m
        for cls, kk in ((1, exp_c), (2, exp_m)):
            m = select(lu, org, eps, base, 0, False, kk, HIGHEST_EPS, idx, bk, be)
            for j in range(m):
                i = idx[j]
                lu[i] = cls
                org[i] = 0
                if eps[i] > 1.0:
                    eps[i] = 1.0
            cnt[0] -= m
            cnt[2 * cls] += m
            if cls == 1:
                exp_c = m
            else:
                exp_m = m

        # ecosystem services from current natural integrity
        sn = 0.0
        for i in range(n):
            if lu[i] == 0:
                sn += eps[i]
        if cnt[0] > 0:
            E = (sn / eps0) ** p
        else:
            E = (eps_min / eps0) ** p

        # integrity update and end-of-year metrics
        lam_o = min(lam_max, Lam) if org_cap != 0.0 else Lam
        s[:] = 0.0
        n_forest = 0
        deg0 = 0
        deg1 = 0
        deg2 = 0
        sat = 0
        for i in range(n):
            li = lu[i]
            e = eps[i]
            if li == 0:
                mult = 1.0 + nat_sign * thn[i] * E * (1.0 - e / eps_max)
                upper = eps_max
            elif li == 1:
                ph = org_phi if org[i] == 1 else Phi
                mult = 1.0 - thc[i] * (M + ph) / E
                upper = 1.0
            else:
                lm = lam_o if org[i] == 1 else Lam
                mult = 1.0 - thm[i] * lm / E
                upper = 1.0
            if mult <= 0.0:
                e = eps_min
                sat += 1
            else:
                e = e * mult
            if e < eps_min:
                e = eps_min
            elif e > upper:
                e = upper
            eps[i] = e
            s[li * 2 + org[i]] += e
            if li == 0 and e > thr_forest:
                n_forest += 1
            if e < thr_deg:
                if li == 0:
                    deg0 += 1
                elif li == 1:
                    deg1 += 1
                else:
                    deg2 += 1
        sat_total += sat

        row = out[t]
        row[0] = D_m; row[1] = D_food; row[2] = D_feed; row[3] = D_c
        row[4] = q_c; row[5] = q_co; row[6] = q_m; row[7] = q_mo; row[8] = Q_c; row[9] = Q_m
        row[10] = scale; row[11] = T; row[12] = M; row[13] = Phi; row[14] = Lam; row[15] = E
        row[16] = cnt[0]; row[17] = cnt[2] + cnt[3]; row[18] = cnt[4] + cnt[5]
        row[19] = n_forest; row[20] = deg0 + deg1 + deg2
        row[21] = s[0] / cnt[0] if cnt[0] > 0 else np.nan
        row[22] = s[2] / cnt[2] if cnt[2] > 0 else np.nan
        row[23] = s[3] / cnt[3] if cnt[3] > 0 else np.nan
        row[24] = s[4] / cnt[4] if cnt[4] > 0 else np.nan
        row[25] = s[5] / cnt[5] if cnt[5] > 0 else np.nan
        row[26] = cnt[3]; row[27] = cnt[5]
        row[28] = exp_c; row[29] = con_c; row[30] = exp_m; row[31] = con_m
        row[32] = deg0; row[33] = deg1; row[34] = deg2; row[35] = sat

        if t == policy_t:
            lam_cap = Lam
        last_Dm = D_m
        last_Qm = Q_m
        last_Dc = D_c
        last_Qc = Q_c

    state[0] = T; state[1] = M; state[2] = Phi; state[3] = Lam; state[4] = lam_cap
    state[5] = last_Dm; state[6] = last_Qm; state[7] = last_Dc; state[8] = last_Qc
    state[10] = sat_total
