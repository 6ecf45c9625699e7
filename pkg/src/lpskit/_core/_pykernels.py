"""Numpy fallback kernels.

Semantics, tie-breaking and floating-point operation order mirror the
Cython twins in _kernels.pyx; changes here must be mirrored there.
"""

from __future__ import annotations

import numpy as np


def _pair_candidates(bi: float, bj: float, q: float, gd: float, eps: float, delta_max: float):
    cands = [0.0, delta_max]
    if 0.0 < -bi < delta_max:
        cands.append(-bi)
    if 0.0 < bj < delta_max:
        cands.append(bj)
    bounds = sorted(cands)
    if q > 0.0:
        for lo, hi in zip(bounds[:-1], bounds[1:]):
            mid = 0.5 * (lo + hi)
            si = 1.0 if bi + mid >= 0.0 else -1.0
            sj = 1.0 if bj - mid >= 0.0 else -1.0
            d_star = -(gd + eps * (si - sj)) / q
            if lo < d_star < hi:
                cands.append(d_star)
    return sorted(cands)


def _pair_step(
    bi: float, bj: float, xi: float, xj: float, gi: float, gj: float,
    c: float, eps: float,
) -> float:
    """Exact minimizer of the two-multiplier subproblem, as step size delta."""
    delta_max = min(c - bi, bj + c)
    if delta_max <= 0.0:
        return 0.0
    q = (xi - xj) * (xi - xj)
    gd = gi - gj
    base = eps * (abs(bi) + abs(bj))
    best_d = 0.0
    best_phi = 0.0
    for d in _pair_candidates(bi, bj, q, gd, eps, delta_max):
        phi = 0.5 * q * d * d + gd * d + eps * (abs(bi + d) + abs(bj - d)) - base
        if phi < best_phi:
            best_phi = phi
            best_d = d
    return best_d


def smo_solve(
    x: np.ndarray,
    y: np.ndarray,
    c: float,
    epsilon: float,
    tol_kkt: float,
    max_passes: int,
):
    """Pair-update loop for the linear-kernel eps-tube regression dual.

    Works on beta = alpha - alpha* in [-c, c] with sum(beta) = 0.  Each
    iteration moves the maximal violating pair (i up, j down) by the exact
    minimizer of the 1D piecewise-quadratic restriction.  The linear kernel
    collapses the gradient to g = s*x - y with scalar s = sum(beta*x), so
    one iteration costs O(n).

    Returns (beta, s, iterations, kkt_violation, converged).
    """
    x = np.ascontiguousarray(x, dtype=np.float64)
    y = np.ascontiguousarray(y, dtype=np.float64)
    n = x.shape[0]
    beta = np.zeros(n)
    s = 0.0
    iterations = 0
    violation = np.inf
    converged = False
    while iterations < max_passes:
        g = s * x - y
        up = np.where(beta >= 0.0, g + epsilon, g - epsilon)
        dn = np.where(beta <= 0.0, -g + epsilon, -g - epsilon)
        up = np.where(beta < c, up, np.inf)
        dn = np.where(beta > -c, dn, np.inf)
        i = int(np.argmin(up))
        j = int(np.argmin(dn))
        violation = -(up[i] + dn[j])
        if violation <= tol_kkt:
            converged = True
            break
        delta = _pair_step(
            float(beta[i]), float(beta[j]), float(x[i]), float(x[j]),
            float(g[i]), float(g[j]), c, epsilon,
        )
        if delta <= 0.0:
            break
        beta[i] += delta
        beta[j] -= delta
        s += delta * (float(x[i]) - float(x[j]))
        iterations += 1
    return beta, float(s), iterations, float(violation), converged


def best_split(
    w: np.ndarray,
    wy: np.ndarray,
    wyy: np.ndarray,
    lo: int,
    hi: int,
    min_weight: float,
):
    """Best threshold position for a node over sorted unique feature values.

    The node owns positions [lo, hi) of the per-unique-value aggregate
    arrays (weight, weighted target sum, weighted squared-target sum).
    Returns (k, sse) where the split sends positions [lo, k) left and
    [k, hi) right, and sse is the summed child SSE; (-1, inf) when no
    split keeps min_weight records on both sides.  Ties pick the lowest
    threshold.
    """
    m = hi - lo
    if m < 2:
        return -1, np.inf
    cw = np.cumsum(w[lo:hi])
    cwy = np.cumsum(wy[lo:hi])
    cwyy = np.cumsum(wyy[lo:hi])
    tw = cw[m - 1]
    twy = cwy[m - 1]
    twyy = cwyy[m - 1]
    lw = cw[: m - 1]
    lwy = cwy[: m - 1]
    lwyy = cwyy[: m - 1]
    rw = tw - lw
    rwy = twy - lwy
    rwyy = twyy - lwyy
    sse = (lwyy - lwy * lwy / lw) + (rwyy - rwy * rwy / rw)
    sse = np.where((lw < min_weight) | (rw < min_weight), np.inf, sse)
    k = int(np.argmin(sse))
    if not np.isfinite(sse[k]):
        return -1, np.inf
    return lo + 1 + k, float(sse[k])
