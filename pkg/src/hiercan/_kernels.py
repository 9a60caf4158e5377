"""Compiled inner loops (numba).

The vertex hash here reproduces :func:`hiercan.environment.hash_vertices`
bit for bit, so compiled simulations read the same environment field as
the Python side without materializing tables.
"""

from __future__ import annotations

import numpy as np
from numba import njit

_GOLDEN = np.uint64(0x9E3779B97F4A7C15)
_HEIGHT_SALT = np.uint64(0xD1B54A32D192ED03)
_POS_SALT = np.uint64(0x8CB92BA72F3D8DD7)


@njit(cache=True)
def _mix(z):
    z = z ^ (z >> np.uint64(30))
    z = z * np.uint64(0xBF58476D1CE4E5B9)
    z = z ^ (z >> np.uint64(27))
    z = z * np.uint64(0x94D049BB133111EB)
    return z ^ (z >> np.uint64(31))


@njit(cache=True)
def vertex_rho(seed, height, idx, N, values, cum):
    """``rho`` of the height-``height`` ancestor of leaf ``idx``."""
    if len(values) == 1:
        return values[0]
    h = _mix(np.uint64(seed) + _GOLDEN)
    h = _mix(h ^ (np.uint64(height) * _HEIGHT_SALT + _GOLDEN))
    rem = idx
    pos = 0
    while rem > 0:
        d = rem % N
        rem //= N
        if d != 0 and pos >= height:
            h = _mix(h ^ _mix(np.uint64(pos + 1) * _POS_SALT + np.uint64(d)))
        pos += 1
    u = np.float64(h >> np.uint64(11)) * (1.0 / 9007199254740992.0)
    for i in range(len(cum)):
        if u < cum[i]:
            return values[i]
    return values[len(values) - 1]


@njit(cache=True)
def _line_rates(x, N, K, c, lam, seed, values, cum, rho, q):
    """Fill ``rho[k]`` along the line of ``x`` and jump rates ``q[j]``."""
    total = 0.0
    scale = 1.0
    for k in range(K + 1):
        rho[k] = vertex_rho(seed, k, x, N, values, cum)
    for j in range(1, K + 1):
        q[j] = (c[j - 1] + lam[j] * rho[j] / N) / scale
        scale *= N
        total += q[j]
    return total


@njit(cache=True)
def pair_chunk(rng_seed, nrep, N, K, c, lam, d0, seeds, values, cum, horizons):
    """Two lineages started at the origin, ``nrep`` replicas.

    ``seeds[r]`` is the environment seed of replica ``r``.  Returns
    (coalesced-by-horizon flags, accumulated hazard at each
    horizon).  Walks are run to the last horizon regardless of
    coalescence, which happens at the first time the hazard integral
    crosses an independent Exp(1) threshold.
    """
    np.random.seed(rng_seed)
    H = len(horizons)
    tmax = horizons[H - 1]
    coal = np.zeros((nrep, H), dtype=np.bool_)
    haz = np.zeros((nrep, H))
    rx = np.empty(K + 1)
    ry = np.empty(K + 1)
    qx = np.zeros(K + 1)
    qy = np.zeros(K + 1)
    powN = np.empty(K + 1, dtype=np.int64)
    powN[0] = 1
    for k in range(1, K + 1):
        powN[k] = powN[k - 1] * N
    for r in range(nrep):
        x = 0
        y = 0
        t = 0.0
        acc = 0.0
        thresh = np.random.exponential(1.0)
        tc = np.inf
        hi = 0
        seed = seeds[r]
        while True:
            Rx = _line_rates(x, N, K, c, lam, seed, values, cum, rx, qx)
            Ry = _line_rates(y, N, K, c, lam, seed, values, cum, ry, qy)
            d = 0
            while d <= K and x // powN[d] != y // powN[d]:
                d += 1
            rate = 2.0 * d0 if d == 0 else 0.0
            for k in range(d, K + 1):
                rate += lam[k] * rx[k] / powN[k]
            R = Rx + Ry
            dt = np.random.exponential(1.0) / R if R > 0 else np.inf
            if tc == np.inf and rate > 0 and acc + rate * min(dt, tmax - t) >= thresh:
                tc = t + (thresh - acc) / rate
            while hi < H and horizons[hi] <= t + dt:
                haz[r, hi] = acc + rate * (horizons[hi] - t)
                coal[r, hi] = tc <= horizons[hi]
                hi += 1
            if hi == H:
                break
            acc += rate * dt
            t += dt
            # pick the jumping lineage and level
            u = np.random.random() * R
            first = u < Rx
            if not first:
                u -= Rx
            j = 1
            while j < K and u >= (qx[j] if first else qy[j]):
                u -= qx[j] if first else qy[j]
                j += 1
            block = powN[j]
            if first:
                x = x // block * block + np.random.randint(0, block)
            else:
                y = y // block * block + np.random.randint(0, block)
    return coal, haz


@njit(cache=True)
def _pick(cum, u):
    i = 0
    while i < len(cum) - 1 and u >= cum[i]:
        i += 1
    return i


@njit(cache=True)
def forward_run(types, N, K, q, mig, imm, theta_cum, d0, blk_rate, blk_cum, blk_off, atom_r, atom_cum,
                rec_times, obs_level, burn, rng_seed):
    """Event-driven forward Cannings model on ``N**K`` colonies of ``M`` slots.

    ``mig[j-1]`` is the per-individual swap rate at level ``j``;
    ``blk_rate[k]`` the total block-event rate at level ``k`` with block
    choice by ``blk_cum[blk_off[k]:blk_off[k+1]]``.  All rates are state
    independent, so the total clock is a single Poisson process.  Besides
    snapshots at ``rec_times`` the run accumulates, after ``burn``, the
    quadratic variation of the type-0 frequency of the ``obs_level``-block
    averages and the time integral of ``sum_b Y_b (1 - Y_b)``.
    """
    np.random.seed(rng_seed)
    ncol, M = types.shape
    cnt = np.zeros((ncol, q), dtype=np.int64)
    for col in range(ncol):
        for s in range(M):
            cnt[col, types[col, s]] += 1
    powN = np.empty(K + 2, dtype=np.int64)
    powN[0] = 1
    for k in range(1, K + 2):
        powN[k] = powN[k - 1] * N
    bsize = powN[obs_level]
    nobs = ncol // bsize
    bM = bsize * M
    obs = np.zeros(nobs, dtype=np.int64)
    for col in range(ncol):
        obs[col // bsize] += cnt[col, 0]
    het = 0.0
    for b in range(nobs):
        y = obs[b] / bM
        het += y * (1.0 - y)
    # event classes: migration levels 1..K, immigration, moran, blocks 0..K
    ncls = K + 2 + K + 1
    rates = np.zeros(ncls)
    for j in range(K):
        rates[j] = mig[j] * ncol * M
    rates[K] = imm * ncol * M
    rates[K + 1] = d0 * ncol * M * (M - 1)
    for k in range(K + 1):
        rates[K + 2 + k] = blk_rate[k]
    R = rates.sum()
    cls_cum = np.cumsum(rates) / R if R > 0 else np.ones(ncls)
    nrec = len(rec_times)
    rec = np.zeros((nrec, ncol, q), dtype=np.int64)
    qv = 0.0
    het_int = 0.0
    t = 0.0
    ri = 0
    tmp_old = np.zeros(nobs, dtype=np.int64)
    nevents = 0
    while ri < nrec:
        dt = np.random.exponential(1.0) / R if R > 0 else np.inf
        while ri < nrec and rec_times[ri] <= t + dt:
            rec[ri] = cnt
            ri += 1
        tn = min(t + dt, rec_times[nrec - 1])
        if tn > burn:
            het_int += het * (tn - max(t, burn))
        if ri == nrec:
            break
        t = tn
        nevents += 1
        cl = _pick(cls_cum, np.random.random())
        if cl < K:
            j = cl + 1
            col = np.random.randint(0, ncol)
            s = np.random.randint(0, M)
            col2 = col // powN[j] * powN[j] + np.random.randint(0, powN[j])
            s2 = np.random.randint(0, M)
            a = types[col, s]
            b = types[col2, s2]
            if a != b:
                types[col, s] = b
                types[col2, s2] = a
                cnt[col, a] -= 1
                cnt[col, b] += 1
                cnt[col2, b] -= 1
                cnt[col2, a] += 1
                ob1 = col // bsize
                ob2 = col2 // bsize
                if ob1 != ob2 and (a == 0 or b == 0):
                    sgn = 1 if b == 0 else -1
                    for ob, dlt in ((ob1, sgn), (ob2, -sgn)):
                        y0 = obs[ob] / bM
                        obs[ob] += dlt
                        y1 = obs[ob] / bM
                        het += y1 * (1 - y1) - y0 * (1 - y0)
                        if t > burn:
                            qv += (y1 - y0) ** 2
        elif cl == K or cl == K + 1:
            col = np.random.randint(0, ncol)
            s = np.random.randint(0, M)
            a = types[col, s]
            if cl == K:
                b = _pick(theta_cum, np.random.random())
            else:
                s2 = np.random.randint(0, M - 1)
                if s2 >= s:
                    s2 += 1
                b = types[col, s2]
            if a != b:
                types[col, s] = b
                cnt[col, a] -= 1
                cnt[col, b] += 1
                if a == 0 or b == 0:
                    ob = col // bsize
                    y0 = obs[ob] / bM
                    obs[ob] += 1 if b == 0 else -1
                    y1 = obs[ob] / bM
                    het += y1 * (1 - y1) - y0 * (1 - y0)
                    if t > burn:
                        qv += (y1 - y0) ** 2
        else:
            k = cl - K - 2
            lo_ = blk_off[k]
            nb = blk_off[k + 1] - lo_
            bi = _pick(blk_cum[lo_:lo_ + nb], np.random.random())
            c0 = bi * powN[k]
            ncb = powN[k]
            nslots = ncb * M
            o0 = c0 // bsize
            no = max(1, ncb // bsize)
            for i in range(no):
                tmp_old[i] = obs[o0 + i]
            # uniform reshuffle (Fisher-Yates over the block's slots)
            for i in range(nslots - 1, 0, -1):
                jx = np.random.randint(0, i + 1)
                ca, sa = c0 + i // M, i % M
                cb, sb = c0 + jx // M, jx % M
                ta = types[ca, sa]
                types[ca, sa] = types[cb, sb]
                types[cb, sb] = ta
            ai = _pick(atom_cum, np.random.random())
            r = atom_r[ai]
            u = np.random.randint(0, nslots)
            a = types[c0 + u // M, u % M]
            for i in range(nslots):
                if np.random.random() < r:
                    types[c0 + i // M, i % M] = a
            for i in range(no):
                obs[o0 + i] = 0
            for cc in range(c0, c0 + ncb):
                for x in range(q):
                    cnt[cc, x] = 0
                for s in range(M):
                    cnt[cc, types[cc, s]] += 1
            for cc in range(o0 * bsize, (o0 + no) * bsize):
                obs[cc // bsize] += cnt[cc, 0]
            for i in range(no):
                y0 = tmp_old[i] / bM
                y1 = obs[o0 + i] / bM
                het += y1 * (1 - y1) - y0 * (1 - y0)
                if t > burn:
                    qv += (y1 - y0) ** 2
    return rec, qv, het_int, nevents


@njit(cache=True)
def mkv_run(counts, c, d, theta_cum, atom_r, atom_rate, horizon, burn, nbatch, rec_dt, rng_seed):
    """Count-based ``n``-particle McKean-Vlasov system.

    Moran copying at rate ``d`` per ordered pair, replacement by a
    theta-draw at rate ``c`` per particle, and Lambda events at rates
    ``atom_rate`` (= w / r^2) replacing each particle with probability
    ``r`` by the type of a uniformly chosen one.  Time averages of the
    type-0 frequency ``x`` and ``x**2`` use the expected holding time
    ``1/R`` per visited state and are kept per time batch after ``burn``.
    """
    np.random.seed(rng_seed)
    q = len(counts)
    n = counts.sum()
    lam_tot = atom_rate.sum()
    atom_cum = np.cumsum(atom_rate) / lam_tot if lam_tot > 0 else np.ones(len(atom_rate))
    bw = np.zeros(nbatch)
    bx = np.zeros(nbatch)
    bxx = np.zeros(nbatch)
    width = (horizon - burn) / nbatch
    nrec = int(horizon / rec_dt) + 1
    rec = np.zeros(nrec)
    ri = 0
    t = 0.0
    wsum = np.zeros(q)
    while True:
        ssq = 0.0
        for a in range(q):
            ssq += counts[a] * counts[a]
        r_moran = d * (n * n - ssq)
        r_imm = c * n
        R = r_moran + r_imm + lam_tot
        x = counts[0] / n
        if R <= 0:
            break
        dt = np.random.exponential(1.0) / R
        while ri < nrec and ri * rec_dt <= t + dt:
            rec[ri] = x
            ri += 1
        if t >= burn:
            b = min(int((t - burn) / width), nbatch - 1)
            h = 1.0 / R
            bw[b] += h
            bx[b] += h * x
            bxx[b] += h * x * x
        t += dt
        if t > horizon:
            break
        u = np.random.random() * R
        if u < r_moran:
            # ordered pair of distinct types, a copied onto b
            for a in range(q):
                wsum[a] = counts[a] * (n - counts[a])
            a = _pick(np.cumsum(wsum) / wsum.sum(), np.random.random())
            v = np.random.random() * (n - counts[a])
            b = 0
            while b < q:
                if b != a:
                    if v < counts[b]:
                        break
                    v -= counts[b]
                b += 1
            counts[a] += 1
            counts[b] -= 1
        elif u < r_moran + r_imm:
            v = np.random.random() * n
            a = 0
            while v >= counts[a]:
                v -= counts[a]
                a += 1
            b = _pick(theta_cum, np.random.random())
            counts[a] -= 1
            counts[b] += 1
        else:
            i = _pick(atom_cum, np.random.random())
            r = atom_r[i]
            v = np.random.random() * n
            a = 0
            while v >= counts[a]:
                v -= counts[a]
                a += 1
            for b in range(q):
                if b != a and counts[b] > 0:
                    m = np.random.binomial(counts[b], r)
                    counts[b] -= m
                    counts[a] += m
    while ri < nrec:
        rec[ri] = counts[0] / n
        ri += 1
    return bw, bx, bxx, rec
