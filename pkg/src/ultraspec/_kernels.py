"""Inner loops: associated-function scan and normalized Legendre recurrence.

Each kernel exists twice.  ``*_nb`` functions are plain loops compiled with
numba; ``*_np`` functions are vectorized numpy with identical arithmetic.  The
public names at the bottom of the module are bound according to
:data:`ultraspec._accel.USE_NUMBA`.
"""

import math

import numpy as np

from ._accel import USE_NUMBA, njit

# scan outcome codes
SCAN_OK = 0
SCAN_TABLE_END = 1
SCAN_LIMIT = 2

RESCALE_BITS = 256
_BIG = 2.0**RESCALE_BITS
_SMALL = 2.0**-RESCALE_BITS


# --------------------------------------------------------------------------
# associated function  sup_k (nu k log r - log M_{nu k})
# --------------------------------------------------------------------------


@njit
def _assoc_scan_nb(logr, nu, logm, k_limit, stop_run):
    n = logr.shape[0]
    ntab = logm.shape[0]
    vals = np.zeros(n)
    kstar = np.zeros(n, dtype=np.int64)
    status = np.zeros(n, dtype=np.int64)
    for i in range(n):
        lr = logr[i]
        t0 = 0.0 - logm[0]
        best = t0
        kb = 0
        prev = t0
        run = 0
        st = SCAN_LIMIT
        k = 1
        while k <= k_limit:
            idx = nu * k
            if idx >= ntab:
                st = SCAN_TABLE_END
                break
            t = (nu * k) * lr - logm[idx]
            if t > best:
                best = t
                kb = k
            if t < prev:
                run += 1
                if run >= stop_run:
                    st = SCAN_OK
                    break
            else:
                run = 0
            prev = t
            k += 1
        vals[i] = best
        kstar[i] = kb
        status[i] = st
    return vals, kstar, status


def _assoc_scan_np(logr, nu, logm, k_limit, stop_run):
    n = logr.shape[0]
    ntab = logm.shape[0]
    vals = np.zeros(n)
    kstar = np.zeros(n, dtype=np.int64)
    status = np.zeros(n, dtype=np.int64)
    k_tab = (ntab - 1) // nu  # largest k with nu*k inside the table
    for i in range(n):
        lr = logr[i]
        t0 = 0.0 - logm[0]
        best, kb, prev, run = t0, 0, t0, 0
        st = SCAN_LIMIT
        k0 = 1
        chunk = 64
        while True:
            k_hi = min(k0 + chunk, k_limit + 1, k_tab + 1)
            if k_hi <= k0:
                st = SCAN_TABLE_END if k_tab < k_limit and k0 > k_tab else SCAN_LIMIT
                break
            ks = np.arange(k0, k_hi)
            t = (nu * ks).astype(np.float64) * lr - logm[nu * ks]
            prevs = np.empty_like(t)
            prevs[0] = prev
            prevs[1:] = t[:-1]
            dec = t < prevs
            c = np.cumsum(dec)
            pos = np.arange(t.shape[0])
            last_reset = np.maximum.accumulate(np.where(dec, -1, pos))
            runs = np.where(last_reset >= 0, c - c[np.maximum(last_reset, 0)], c + run)
            hit = np.flatnonzero(runs >= stop_run)
            stop = hit[0] if hit.size else t.shape[0] - 1
            seg = t[: stop + 1]
            j = int(np.argmax(seg))
            if seg[j] > best:
                best = seg[j]
                kb = k0 + j
            if hit.size:
                st = SCAN_OK
                break
            prev = t[-1]
            run = int(runs[-1])
            k0 = k_hi
            chunk *= 2
        vals[i] = best
        kstar[i] = kb
        status[i] = st
    return vals, kstar, status


@njit
def _assoc_concave_nb(logr, nu, logm, k_limit):
    n = logr.shape[0]
    ntab = logm.shape[0]
    k_tab = (ntab - 1) // nu
    vals = np.zeros(n)
    kstar = np.zeros(n, dtype=np.int64)
    status = np.zeros(n, dtype=np.int64)
    top = min(k_tab, k_limit)
    for i in range(n):
        lr = logr[i]
        # smallest k with t(k+1) <= t(k); t is concave in k for log-convex tables
        hi = 1
        found = False
        while True:
            if hi >= top:
                break
            if (nu * (hi + 1)) * lr - logm[nu * (hi + 1)] <= (nu * hi) * lr - logm[nu * hi]:
                found = True
                break
            hi *= 2
        if not found:
            hi = top
            if hi < 1 or (nu * hi) * lr - logm[nu * hi] > (nu * (hi - 1)) * lr - logm[nu * (hi - 1)]:
                status[i] = SCAN_TABLE_END if k_tab < k_limit else SCAN_LIMIT
                continue
        lo = 0
        # invariant: t(lo+1) > t(lo) unless lo is the answer, t(hi+1) <= t(hi)
        if 1 * nu * lr - logm[nu] <= 0.0 - logm[0]:
            hi = 0
        while hi - lo > 1:
            mid = (lo + hi) // 2
            if (nu * (mid + 1)) * lr - logm[nu * (mid + 1)] <= (nu * mid) * lr - logm[nu * mid]:
                hi = mid
            else:
                lo = mid
        k = hi
        vals[i] = (0.0 - logm[0]) if k == 0 else (nu * k) * lr - logm[nu * k]
        kstar[i] = k
    return vals, kstar, status


def _assoc_concave_np(logr, nu, logm, k_limit):
    n = logr.shape[0]
    ntab = logm.shape[0]
    k_tab = (ntab - 1) // nu
    top = min(k_tab, k_limit)
    vals = np.zeros(n)
    kstar = np.zeros(n, dtype=np.int64)
    status = np.zeros(n, dtype=np.int64)

    def term(k):
        return (nu * k).astype(np.float64) * logr - logm[nu * k]

    def falls(k):
        return term(k + 1) <= term(k)

    hi = np.ones(n, dtype=np.int64)
    found = np.zeros(n, dtype=bool)
    while True:
        act = ~found & (hi < top)
        if not act.any():
            break
        f = np.zeros(n, dtype=bool)
        f[act] = falls(np.where(act, hi, 0))[act]
        found |= f
        hi = np.where(act & ~f, hi * 2, hi)
    missing = ~found
    if missing.any():
        hi = np.where(missing, top, hi)
        if top >= 1:
            bad = missing & ~falls(np.maximum(hi - 1, 0))
        else:
            bad = missing
        status[bad] = SCAN_TABLE_END if k_tab < k_limit else SCAN_LIMIT
    else:
        bad = np.zeros(n, dtype=bool)
    lo = np.zeros(n, dtype=np.int64)
    at0 = (nu * 1.0) * logr - logm[nu] <= 0.0 - logm[0]
    hi = np.where(at0, 0, hi)
    while True:
        act = (hi - lo > 1) & ~bad
        if not act.any():
            break
        mid = (lo + hi) // 2
        f = falls(np.where(act, mid, 0))
        hi = np.where(act & f, mid, hi)
        lo = np.where(act & ~f, mid, lo)
    k = np.where(bad, 0, hi)
    v = np.where(k == 0, 0.0 - logm[0], term(k))
    vals[~bad] = v[~bad]
    kstar[~bad] = k[~bad]
    return vals, kstar, status


# --------------------------------------------------------------------------
# orthonormal associated Legendre functions for fixed order m
#   Lambda_l^m(x), l = m..lmax, with 2*pi * int_{-1}^{1} Lambda^2 dx = 1
#   (Condon-Shortley phase included)
# --------------------------------------------------------------------------


def legendre_coefficients(m, lmax):
    """Recurrence coefficients a_l = sqrt((4l^2-1)/(l^2-m^2)) for l = m+1..lmax."""
    ls = np.arange(m + 1, lmax + 1, dtype=np.float64)
    return np.sqrt((4.0 * ls * ls - 1.0) / (ls * ls - float(m) * float(m)))


def sectoral_log2(m):
    k = np.arange(1, m + 1, dtype=np.float64)
    return 0.5 * math.log2((2 * m + 1) / (4.0 * math.pi)) + 0.5 * math.fsum(np.log2((2.0 * k - 1.0) / (2.0 * k)))


@njit
def _legendre_m_nb(m, lmax, x, mant, expo, a):
    nx = x.shape[0]
    out = np.zeros((lmax - m + 1, nx))
    for i in range(nx):
        p_cur = mant[i]
        if p_cur == 0.0:
            continue
        E = expo[i]
        h = E // 2
        out[0, i] = p_cur * 2.0**h * 2.0 ** (E - h)
        if lmax > m:
            p_prev = p_cur
            p_cur = a[0] * x[i] * p_prev
            out[1, i] = p_cur * 2.0**h * 2.0 ** (E - h)
            for l in range(m + 2, lmax + 1):
                al = a[l - m - 1]
                p_new = al * (x[i] * p_cur - p_prev / a[l - m - 2])
                p_prev = p_cur
                p_cur = p_new
                if abs(p_cur) > _BIG:
                    p_cur *= _SMALL
                    p_prev *= _SMALL
                    E += RESCALE_BITS
                    h = E // 2
                out[l - m, i] = p_cur * 2.0**h * 2.0 ** (E - h)
    return out


def _legendre_m_np(m, lmax, x, mant, expo, a):
    nx = x.shape[0]
    out = np.zeros((lmax - m + 1, nx))
    p_cur = mant.copy()
    E = expo.copy()

    def scaled(p, E):
        h = E // 2
        return p * np.power(2.0, h.astype(np.float64)) * np.power(2.0, (E - h).astype(np.float64))

    out[0] = scaled(p_cur, E)
    if lmax > m:
        p_prev = p_cur
        p_cur = a[0] * x * p_prev
        out[1] = scaled(p_cur, E)
        for l in range(m + 2, lmax + 1):
            al = a[l - m - 1]
            p_new = al * (x * p_cur - p_prev / a[l - m - 2])
            p_prev = p_cur
            p_cur = p_new
            big = np.abs(p_cur) > _BIG
            if big.any():
                p_cur = np.where(big, p_cur * _SMALL, p_cur)
                p_prev = np.where(big, p_prev * _SMALL, p_prev)
                E = np.where(big, E + RESCALE_BITS, E)
            out[l - m] = scaled(p_cur, E)
    out[:, mant == 0.0] = 0.0  # the loop kernel skips these points (+0, never -0)
    return out


if USE_NUMBA:
    _assoc_scan = _assoc_scan_nb
    _assoc_concave = _assoc_concave_nb
    _legendre_m = _legendre_m_nb
else:
    _assoc_scan = _assoc_scan_np
    _assoc_concave = _assoc_concave_np
    _legendre_m = _legendre_m_np


def assoc_scan(logr, nu, logm, k_limit, stop_run, backend=None):
    """Forward scan of nu*k*log r - log M_{nu k} with early stop.

    ``logr`` must be finite.  Returns ``(values, kstar, status)`` arrays.
    """
    fn = _assoc_scan if backend is None else {"numba": _assoc_scan_nb, "numpy": _assoc_scan_np}[backend]
    logr = np.ascontiguousarray(logr, dtype=np.float64)
    logm = np.ascontiguousarray(logm, dtype=np.float64)
    return fn(logr, int(nu), logm, int(k_limit), int(stop_run))


def assoc_concave(logr, nu, logm, k_limit, backend=None):
    """First maximizer of nu*k*log r - log M_{nu k} by bisection on the increments.

    Valid when log M_{nu k} is convex in k (the terms are then concave), in
    which case it returns the scan's result in O(log k*) steps.
    """
    fn = _assoc_concave if backend is None else {"numba": _assoc_concave_nb, "numpy": _assoc_concave_np}[backend]
    logr = np.ascontiguousarray(logr, dtype=np.float64)
    logm = np.ascontiguousarray(logm, dtype=np.float64)
    return fn(logr, int(nu), logm, int(k_limit))


def legendre_m(m, lmax, x, backend=None):
    """Orthonormal Lambda_l^m(x) for l = m..lmax; rows indexed by l - m."""
    fn = _legendre_m if backend is None else {"numba": _legendre_m_nb, "numpy": _legendre_m_np}[backend]
    x = np.ascontiguousarray(x, dtype=np.float64)
    with np.errstate(divide="ignore"):
        log2sin = 0.5 * np.log2(np.maximum(0.0, (1.0 - x) * (1.0 + x)))
    a = legendre_coefficients(m, lmax)
    if a.size == 0:
        a = np.ones(1)
    # Lambda_m^m = (-1)^m 2^(c0 + m log2 sin), split into mantissa * 2^expo
    c0 = sectoral_log2(m)
    live = np.ones(x.shape, dtype=bool) if m == 0 else np.isfinite(log2sin)
    lv = np.full(x.shape, c0) if m == 0 else c0 + m * np.where(live, log2sin, 0.0)
    e = np.floor(lv)
    sign = -1.0 if m % 2 else 1.0
    mant = np.where(live, sign * np.exp2(lv - e), 0.0)
    return fn(int(m), int(lmax), x, mant, e.astype(np.int64), a)
