"""Independent reference implementations used to check the solvers.

Everything here deliberately takes a different computational route than the
library code: dense algebra instead of banded/factored solves, grid search
instead of descent, projected gradient instead of SMO, naive per-threshold
SSE instead of prefix sums.
"""

from __future__ import annotations

import numpy as np


# --- dense linear algebra ----------------------------------------------------


def normal_equations_solve(design: np.ndarray, y: np.ndarray) -> np.ndarray:
    """Least squares via explicitly formed normal equations."""
    gram = design.T @ design
    return np.linalg.solve(gram, design.T @ y)


def band_to_dense(bandwidth: int, diagonals: np.ndarray) -> np.ndarray:
    n = diagonals.shape[1]
    full = np.zeros((n, n))
    for d in range(bandwidth + 1):
        for i in range(n - d):
            full[i + d, i] = diagonals[d, i]
            full[i, i + d] = diagonals[d, i]
    return full


# --- projected-gradient QP for the eps-tube regression dual -------------------


def _project_box_hyperplane(v: np.ndarray, z: np.ndarray, c: float) -> np.ndarray:
    """Euclidean projection onto {t in [0, c]^m : z @ t = 0} with z in {+-1}^m.

    The KKT multiplier lam solves z @ clip(v - lam*z, 0, c) = 0, a
    monotonically decreasing piecewise-linear equation; solved by bisection
    to machine precision.
    """
    lo = -(np.max(np.abs(v)) + c + 1.0)
    hi = -lo

    def h(lam: float) -> float:
        return float(z @ np.clip(v - lam * z, 0.0, c))

    for _ in range(200):
        mid = 0.5 * (lo + hi)
        if h(mid) > 0.0:
            lo = mid
        else:
            hi = mid
    return np.clip(v - 0.5 * (lo + hi) * z, 0.0, c)


def qp_dual_reference(
    x: np.ndarray,
    y: np.ndarray,
    c: float,
    epsilon: float,
    max_iter: int = 1_000_000,
    accelerated: bool = True,
) -> tuple[np.ndarray, float]:
    """Brute-force solve of the eps-tube dual by projected gradient.

    Works on the stacked variables t = (alpha, alpha*) in [0, c]^{2n} with
    the smooth objective 0.5 b'Kb - y'b + eps*sum(t), b = alpha - alpha*,
    projecting every step onto the box intersected with sum(b) = 0.
    `accelerated=True` adds Nesterov momentum (plain projected gradient
    otherwise); both stop early once the iterate is stationary to machine
    precision.  Returns (beta, dual objective).
    """
    x = np.asarray(x, dtype=np.float64)
    y = np.asarray(y, dtype=np.float64)
    n = x.size
    z = np.concatenate([np.ones(n), -np.ones(n)])
    lipschitz = 2.0 * float(x @ x) + 1e-12
    step = 1.0 / lipschitz

    def gradient(t: np.ndarray) -> np.ndarray:
        beta = t[:n] - t[n:]
        s = float(x @ beta)
        g_beta = s * x - y
        return np.concatenate([g_beta, -g_beta]) + epsilon

    t = np.zeros(2 * n)
    t_prev = t.copy()
    momentum = t.copy()
    for it in range(max_iter):
        base = momentum if accelerated else t
        t_next = _project_box_hyperplane(base - step * gradient(base), z, c)
        if accelerated:
            momentum = t_next + (it / (it + 3.0)) * (t_next - t)
        moved = float(np.max(np.abs(t_next - t)))
        t_prev, t = t, t_next
        if moved < 1e-16:
            break
    beta = t[:n] - t[n:]
    s = float(x @ beta)
    objective = 0.5 * s * s - float(y @ beta) + epsilon * float(np.sum(np.abs(beta)))
    return beta, objective


# --- grid searches ------------------------------------------------------------


def zoom_grid_minimize(
    objective, center: np.ndarray, half_width: np.ndarray, final_step: float,
    points_per_axis: int = 41, polish_steps: int = 6,
) -> tuple[np.ndarray, float]:
    """Dense 2D grid search with successive zooming, then sub-grid polish.

    Scans a points_per_axis^2 grid, re-centers on the best cell and shrinks
    the window until the grid step falls below final_step; the polish stage
    keeps zooming a few extra decades so the returned minimizer is near
    machine precision.  `objective` must accept (n, 2) arrays and return n
    values.
    """
    center = np.asarray(center, dtype=np.float64).copy()
    half_width = np.asarray(half_width, dtype=np.float64).copy()
    extra = 0
    while True:
        axes = [np.linspace(center[d] - half_width[d], center[d] + half_width[d], points_per_axis) for d in range(2)]
        grid_a, grid_b = np.meshgrid(axes[0], axes[1], indexing="ij")
        params = np.column_stack([grid_a.ravel(), grid_b.ravel()])
        values = objective(params)
        best = int(np.argmin(values))
        center = params[best]
        step = 2.0 * half_width / (points_per_axis - 1)
        if np.all(step <= final_step):
            extra += 1
            if extra > polish_steps:
                break
        half_width = 2.5 * step
    return center, float(np.min(values))


def trilateration_grid_oracle(
    gateways: np.ndarray, distances: np.ndarray, final_step: float = 1e-3,
) -> tuple[np.ndarray, float]:
    """Grid-search minimizer of sum((||p - g_i|| - d_i)^2) to 1 mm, refined."""

    def objective(points: np.ndarray) -> np.ndarray:
        diffs = points[:, None, :] - gateways[None, :, :]
        ranges = np.sqrt(np.sum(diffs**2, axis=2))
        return np.sum((ranges - distances) ** 2, axis=1)

    pad = float(np.max(distances)) + 1.0
    low = gateways.min(axis=0) - pad
    high = gateways.max(axis=0) + pad
    center = 0.5 * (low + high)
    half_width = 0.5 * (high - low)
    return zoom_grid_minimize(objective, center, half_width, final_step, points_per_axis=61, polish_steps=8)


def exponential_fit_grid_oracle(
    rssi: np.ndarray, dist: np.ndarray, a_range: tuple[float, float], b_range: tuple[float, float],
) -> tuple[np.ndarray, float]:
    """Dense (a, b) grid for min sum((a*exp(b*r) - d)^2), step 1e-3 then polish."""

    def objective(params: np.ndarray) -> np.ndarray:
        pred = params[:, 0:1] * np.exp(params[:, 1:2] * rssi[None, :])
        return np.sum((pred - dist[None, :]) ** 2, axis=1)

    center = np.array([0.5 * (a_range[0] + a_range[1]), 0.5 * (b_range[0] + b_range[1])])
    half_width = np.array([0.5 * (a_range[1] - a_range[0]), 0.5 * (b_range[1] - b_range[0])])
    return zoom_grid_minimize(objective, center, half_width, 1e-3, points_per_axis=81, polish_steps=10)


# --- naive CART ---------------------------------------------------------------


def naive_best_split(x: np.ndarray, y: np.ndarray, min_leaf: int):
    """Exhaustive threshold scan with direct SSE recomputation per candidate."""
    order = np.argsort(x, kind="stable")
    xs = x[order]
    uniques = np.unique(xs)
    best = None
    for left_val, right_val in zip(uniques[:-1], uniques[1:]):
        threshold = 0.5 * (left_val + right_val)
        mask = x <= threshold
        n_left = int(mask.sum())
        if n_left < min_leaf or (x.size - n_left) < min_leaf:
            continue
        sse = float(np.sum((y[mask] - y[mask].mean()) ** 2)) + float(
            np.sum((y[~mask] - y[~mask].mean()) ** 2)
        )
        if best is None or sse < best[1]:
            best = (threshold, sse)
    return best


def naive_cart(x: np.ndarray, y: np.ndarray, max_depth: int, min_leaf: int):
    """Depth-limited CART as nested tuples: ('leaf', value) / ('split', thr, l, r)."""
    parent_sse = float(np.sum((y - y.mean()) ** 2))
    if max_depth <= 0 or x.size < 2 * min_leaf:
        return ("leaf", float(y.mean()))
    best = naive_best_split(x, y, min_leaf)
    if best is None or not parent_sse - best[1] > 0.0:
        return ("leaf", float(y.mean()))
    threshold = best[0]
    mask = x <= threshold
    return (
        "split",
        threshold,
        naive_cart(x[mask], y[mask], max_depth - 1, min_leaf),
        naive_cart(x[~mask], y[~mask], max_depth - 1, min_leaf),
    )


# --- dense smoothing-spline oracle ---------------------------------------------


def dense_spline_knot_values(
    knots: np.ndarray, targets: np.ndarray, weights: np.ndarray, p: float
) -> np.ndarray:
    """Minimize p*sum(w*(t - a)^2) + (1-p)*Int f'' over natural cubic splines.

    Uses the dense curvature quadratic form Omega = 6 Q R^{-1} Q' on the knot
    values directly (no Reinsch elimination), solving
    (p W + (1-p) Omega) a = p W t with dense linear algebra.
    """
    h = np.diff(knots)
    n = knots.size
    r_mat = np.zeros((n - 2, n - 2))
    for i in range(n - 2):
        r_mat[i, i] = 2.0 * (h[i] + h[i + 1])
        if i + 1 < n - 2:
            r_mat[i, i + 1] = h[i + 1]
            r_mat[i + 1, i] = h[i + 1]
    q_mat = np.zeros((n, n - 2))
    for i in range(n - 2):
        q_mat[i, i] = 1.0 / h[i]
        q_mat[i + 1, i] = -1.0 / h[i] - 1.0 / h[i + 1]
        q_mat[i + 2, i] = 1.0 / h[i + 1]
    omega = 6.0 * q_mat @ np.linalg.solve(r_mat, q_mat.T)
    w_mat = np.diag(weights)
    lhs = p * w_mat + (1.0 - p) * omega
    return np.linalg.solve(lhs, p * weights * targets)
