# cython: language_level=3, boundscheck=False, wraparound=False
"""Compiled kernels; semantic twins of _pykernels.py (keep in lockstep).

Tie-breaking and floating-point operation order match the numpy fallback,
so both backends produce identical iterates (the extension is compiled
with -ffp-contract=off to keep it that way).
"""

from libc.math cimport INFINITY, fabs, isfinite

import numpy as np


cdef void _sort_small(double* a, int n) noexcept nogil:
    cdef int i, j
    cdef double key
    for i in range(1, n):
        key = a[i]
        j = i - 1
        while j >= 0 and a[j] > key:
            a[j + 1] = a[j]
            j -= 1
        a[j + 1] = key


cdef double _pair_step(double bi, double bj, double xi, double xj,
                       double gi, double gj, double c, double eps) noexcept nogil:
    cdef double delta_max = c - bi
    cdef double room_j = bj + c
    if room_j < delta_max:
        delta_max = room_j
    if delta_max <= 0.0:
        return 0.0
    cdef double q = (xi - xj) * (xi - xj)
    cdef double gd = gi - gj
    cdef double base = eps * (fabs(bi) + fabs(bj))
    cdef double cands[8]
    cdef int ncand = 0
    cands[ncand] = 0.0
    ncand += 1
    cands[ncand] = delta_max
    ncand += 1
    if 0.0 < -bi and -bi < delta_max:
        cands[ncand] = -bi
        ncand += 1
    if 0.0 < bj and bj < delta_max:
        cands[ncand] = bj
        ncand += 1
    _sort_small(cands, ncand)
    cdef int nbounds = ncand
    cdef int t
    cdef double seg_lo, seg_hi, mid, si, sj, d_star
    if q > 0.0:
        for t in range(nbounds - 1):
            seg_lo = cands[t]
            seg_hi = cands[t + 1]
            mid = 0.5 * (seg_lo + seg_hi)
            si = 1.0 if bi + mid >= 0.0 else -1.0
            sj = 1.0 if bj - mid >= 0.0 else -1.0
            d_star = -(gd + eps * (si - sj)) / q
            if seg_lo < d_star and d_star < seg_hi:
                cands[ncand] = d_star
                ncand += 1
    _sort_small(cands, ncand)
    cdef double best_d = 0.0
    cdef double best_phi = 0.0
    cdef double d, phi
    for t in range(ncand):
        d = cands[t]
        phi = 0.5 * q * d * d + gd * d + eps * (fabs(bi + d) + fabs(bj - d)) - base
        if phi < best_phi:
            best_phi = phi
            best_d = d
    return best_d


def smo_solve(x_in, y_in, double c, double epsilon, double tol_kkt, long max_passes):
    """See _pykernels.smo_solve."""
    cdef double[::1] x = np.ascontiguousarray(x_in, dtype=np.float64)
    cdef double[::1] y = np.ascontiguousarray(y_in, dtype=np.float64)
    cdef Py_ssize_t n = x.shape[0]
    beta_arr = np.zeros(n, dtype=np.float64)
    cdef double[::1] beta = beta_arr
    cdef double s = 0.0
    cdef long iterations = 0
    cdef double violation = INFINITY
    cdef bint converged = False
    cdef Py_ssize_t i, j, k
    cdef double g_k, up_k, dn_k, up_best, dn_best, delta
    while iterations < max_passes:
        up_best = INFINITY
        dn_best = INFINITY
        i = 0
        j = 0
        for k in range(n):
            g_k = s * x[k] - y[k]
            if beta[k] >= 0.0:
                up_k = g_k + epsilon
            else:
                up_k = g_k - epsilon
            if beta[k] <= 0.0:
                dn_k = -g_k + epsilon
            else:
                dn_k = -g_k - epsilon
            if not (beta[k] < c):
                up_k = INFINITY
            if not (beta[k] > -c):
                dn_k = INFINITY
            if up_k < up_best:
                up_best = up_k
                i = k
            if dn_k < dn_best:
                dn_best = dn_k
                j = k
        violation = -(up_best + dn_best)
        if violation <= tol_kkt:
            converged = True
            break
        delta = _pair_step(beta[i], beta[j], x[i], x[j],
                           s * x[i] - y[i], s * x[j] - y[j], c, epsilon)
        if delta <= 0.0:
            break
        beta[i] += delta
        beta[j] -= delta
        s += delta * (x[i] - x[j])
        iterations += 1
    return beta_arr, float(s), int(iterations), float(violation), bool(converged)


def best_split(w_in, wy_in, wyy_in, Py_ssize_t lo, Py_ssize_t hi, double min_weight):
    """See _pykernels.best_split."""
    cdef double[::1] w = np.ascontiguousarray(w_in, dtype=np.float64)
    cdef double[::1] wy = np.ascontiguousarray(wy_in, dtype=np.float64)
    cdef double[::1] wyy = np.ascontiguousarray(wyy_in, dtype=np.float64)
    cdef Py_ssize_t m = hi - lo
    if m < 2:
        return -1, INFINITY
    cdef double tw = 0.0, twy = 0.0, twyy = 0.0
    cdef Py_ssize_t k
    for k in range(lo, hi):
        tw += w[k]
        twy += wy[k]
        twyy += wyy[k]
    cdef double lw = 0.0, lwy = 0.0, lwyy = 0.0
    cdef double rw, rwy, rwyy, sse
    cdef double best_sse = INFINITY
    cdef Py_ssize_t best_k = -1
    for k in range(lo, hi - 1):
        lw += w[k]
        lwy += wy[k]
        lwyy += wyy[k]
        rw = tw - lw
        rwy = twy - lwy
        rwyy = twyy - lwyy
        sse = (lwyy - lwy * lwy / lw) + (rwyy - rwy * rwy / rw)
        if lw < min_weight or rw < min_weight:
            sse = INFINITY
        if sse < best_sse:
            best_sse = sse
            best_k = k + 1
    if not isfinite(best_sse):
        return -1, INFINITY
    return best_k, best_sse
