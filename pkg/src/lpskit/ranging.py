"""The nine RSSI-to-distance model kinds, with a uniform train/predict/save contract.

Every fit returns a TrainReport whose model knows its kind, its parameter
block, the distance range it was trained on, and its training RMSE in
meters (recomputed through predict_distance, clamping included).
Predictions are clamped to [0, clamp_factor * max trained distance]:
ranging functions are physical distances and several model classes
diverge outside the trained RSSI range.
"""

from __future__ import annotations

import math
import time
from dataclasses import dataclass, replace
from pathlib import Path
from typing import Mapping, Sequence

import numpy as np

from ._core import best_split
from .dataset import RangingDataset
from .errors import NonFiniteError, ParseError, SolverFailure, TooFewPoints, VersionMismatch
from .numopt import (
    SvrProblem,
    banded_cholesky,
    linear_least_squares,
    resolve_epsilon,
    smo_svr,
    solve_banded_factored,
    trust_region_nls,
)

MODEL_KINDS = (
    "path_loss",
    "linear",
    "polynomial3",
    "exponential",
    "gaussian_sum",
    "smoothing_spline",
    "svr_linear",
    "cart",
    "lsboost",
)

DEFAULT_CLAMP_FACTOR = 2.0

MODEL_MAGIC = "lpskit-model"
MODEL_VERSION = "v1"


@dataclass(frozen=True)
class RangingModel:
    """A trained RSSI -> distance function of one of the nine kinds."""

    kind: str
    gateway_id: str
    params: dict
    train_rmse: float
    train_range: tuple[float, float]
    clamp_factor: float = DEFAULT_CLAMP_FACTOR


@dataclass(frozen=True)
class TrainReport:
    model: RangingModel
    n_train: int
    solver_status: str
    wall_time: float


# --- prediction ---------------------------------------------------------------


def _tree_predict(node: tuple, x: np.ndarray) -> np.ndarray:
    if node[0] == "leaf":
        return np.full(x.shape, node[1])
    _, threshold, left, right = node
    out = np.empty(x.shape)
    mask = x <= threshold
    out[mask] = _tree_predict(left, x[mask])
    out[~mask] = _tree_predict(right, x[~mask])
    return out


def _spline_eval(params: Mapping, x: np.ndarray) -> np.ndarray:
    knots = np.asarray(params["knots"])
    values = np.asarray(params["values"])
    second = np.asarray(params["second_derivs"])
    h = np.diff(knots)
    out = np.empty(x.shape)

    idx = np.clip(np.searchsorted(knots, x, side="right") - 1, 0, knots.size - 2)
    x0 = knots[idx]
    x1 = knots[idx + 1]
    hi = h[idx]
    t_up = x1 - x
    t_lo = x - x0
    inside = (x >= knots[0]) & (x <= knots[-1])
    out[inside] = (
        values[idx] * t_up / hi
        + values[idx + 1] * t_lo / hi
        + second[idx] * (t_up**3 / hi - hi * t_up) / 6.0
        + second[idx + 1] * (t_lo**3 / hi - hi * t_lo) / 6.0
    )[inside]

    slope_left = (values[1] - values[0]) / h[0] - h[0] * (2.0 * second[0] + second[1]) / 6.0
    slope_right = (values[-1] - values[-2]) / h[-1] + h[-1] * (second[-2] + 2.0 * second[-1]) / 6.0
    below = x < knots[0]
    above = x > knots[-1]
    out[below] = values[0] + slope_left * (x[below] - knots[0])
    out[above] = values[-1] + slope_right * (x[above] - knots[-1])
    return out


def _predict_raw(kind: str, params: Mapping, r: np.ndarray) -> np.ndarray:
    if kind == "path_loss":
        return 10.0 ** ((r - params["beta0"]) / params["beta1"])
    if kind == "linear":
        return params["beta0"] + params["beta1"] * r
    if kind == "polynomial3":
        z = (r - params["mu"]) / params["sd"]
        return params["c0"] + z * (params["c1"] + z * (params["c2"] + z * params["c3"]))
    if kind == "exponential":
        return params["a"] * np.exp(params["b"] * r)
    if kind == "gaussian_sum":
        amps = np.asarray(params["amplitudes"])
        cents = np.asarray(params["centroids"])
        widths = np.asarray(params["widths"])
        acc = np.zeros(r.shape)
        for a, b, c in zip(amps, cents, widths):
            acc += a * np.exp(-(((r - b) / c) ** 2))
        return acc
    if kind == "smoothing_spline":
        return _spline_eval(params, r)
    if kind == "svr_linear":
        return params["weight"] * r + params["bias"]
    if kind == "cart":
        return _tree_predict(params["tree"], r)
    if kind == "lsboost":
        acc = np.full(r.shape, params["init"])
        for tree in params["trees"]:
            acc += params["learn_rate"] * _tree_predict(tree, r)
        return acc
    raise SolverFailure(f"unknown model kind {kind!r}")


def predict_distance(model: RangingModel, rssi):
    """Evaluate the model; result clamped to [0, clamp_factor * max train distance].

    Accepts a scalar or an array, never returns NaN.
    """
    r = np.asarray(rssi, dtype=np.float64)
    if not np.isfinite(r).all():
        raise NonFiniteError("non-finite rssi passed to predict_distance")
    scalar = r.ndim == 0
    r = np.atleast_1d(r)
    with np.errstate(over="ignore", invalid="ignore", divide="ignore"):
        raw = _predict_raw(model.kind, model.params, r)
    upper = model.clamp_factor * model.train_range[1]
    raw = np.where(np.isnan(raw), 0.0, raw)
    clamped = np.clip(raw, 0.0, upper)
    return float(clamped[0]) if scalar else clamped


def path_loss_exponent(model: RangingModel) -> float:
    """Propagation exponent implied by a fitted path-loss model."""
    return -model.params["beta1"] / 10.0


# --- shared fit plumbing --------------------------------------------------------


def _arrays(train: RangingDataset) -> tuple[np.ndarray, np.ndarray]:
    return (
        np.asarray(train.rssi_values(), dtype=np.float64),
        np.asarray(train.distances(), dtype=np.float64),
    )


def _require_points(train: RangingDataset, minimum: int, kind: str) -> None:
    if len(train) < minimum:
        raise TooFewPoints(f"{kind} needs >= {minimum} training records, got {len(train)}")


def _params_finite(params: Mapping) -> bool:
    def walk(value) -> bool:
        if isinstance(value, (int, float)):
            return math.isfinite(value)
        if isinstance(value, str):
            return True
        if isinstance(value, (tuple, list, np.ndarray)):
            return all(walk(v) for v in value)
        return True

    return all(walk(v) for v in params.values())


def _finish(
    kind: str,
    train: RangingDataset,
    params: dict,
    status: str,
    started: float,
    clamp_factor: float,
) -> TrainReport:
    if not _params_finite(params):
        raise SolverFailure(f"{kind} fit produced non-finite parameters")
    rssi, dist = _arrays(train)
    model = RangingModel(
        kind=kind,
        gateway_id=train.gateway_id,
        params=params,
        train_rmse=0.0,
        train_range=(float(dist.min()), float(dist.max())),
        clamp_factor=clamp_factor,
    )
    errors = predict_distance(model, rssi) - dist
    model = replace(model, train_rmse=float(np.sqrt(np.mean(errors**2))))
    return TrainReport(model, len(train), status, time.perf_counter() - started)


# --- regression-family fits -----------------------------------------------------


def fit_path_loss(
    train: RangingDataset, refine: bool = False, clamp_factor: float = DEFAULT_CLAMP_FACTOR
) -> TrainReport:
    """Log-distance law: regress rssi on log10(distance), invert for prediction.

    beta1 = -10n; d(r) = 10**((r - beta0) / beta1).  With `refine`, the
    coefficients are polished by trust-region descent on distance-domain SSE.
    """
    started = time.perf_counter()
    _require_points(train, 3, "path_loss")
    rssi, dist = _arrays(train)
    design = np.column_stack([np.ones(rssi.size), np.log10(dist)])
    beta = linear_least_squares(design, rssi)
    if abs(beta[1]) < 1e-12:
        raise SolverFailure("path_loss: flat rssi/log-distance relation")
    status = "closed_form"
    if refine:

        def residual(theta):
            with np.errstate(over="ignore"):
                return 10.0 ** ((rssi - theta[0]) / theta[1]) - dist

        def jacobian(theta):
            with np.errstate(over="ignore"):
                u = (rssi - theta[0]) / theta[1]
                d = 10.0**u
                return np.column_stack(
                    [-d * math.log(10.0) / theta[1], -d * math.log(10.0) * u / theta[1]]
                )

        beta, _, status = trust_region_nls(residual, beta, jacobian_fn=jacobian)
    params = {"beta0": float(beta[0]), "beta1": float(beta[1])}
    return _finish("path_loss", train, params, status, started, clamp_factor)


def fit_linear(
    train: RangingDataset, clamp_factor: float = DEFAULT_CLAMP_FACTOR
) -> TrainReport:
    """Straight line distance = beta0 + beta1 * rssi by least squares."""
    started = time.perf_counter()
    _require_points(train, 3, "linear")
    rssi, dist = _arrays(train)
    beta = linear_least_squares(np.column_stack([np.ones(rssi.size), rssi]), dist)
    params = {"beta0": float(beta[0]), "beta1": float(beta[1])}
    return _finish("linear", train, params, "closed_form", started, clamp_factor)


def fit_polynomial3(
    train: RangingDataset, clamp_factor: float = DEFAULT_CLAMP_FACTOR
) -> TrainReport:
    """Degree-3 polynomial on z-scored rssi (standardization kept with the model)."""
    started = time.perf_counter()
    _require_points(train, 5, "polynomial3")
    rssi, dist = _arrays(train)
    mu = float(rssi.mean())
    sd = float(rssi.std())
    if sd == 0.0:
        sd = 1.0
    z = (rssi - mu) / sd
    design = np.column_stack([np.ones(z.size), z, z**2, z**3])
    coef = linear_least_squares(design, dist)
    params = {
        "mu": mu,
        "sd": sd,
        "c0": float(coef[0]),
        "c1": float(coef[1]),
        "c2": float(coef[2]),
        "c3": float(coef[3]),
    }
    return _finish("polynomial3", train, params, "closed_form", started, clamp_factor)


def fit_exponential(
    train: RangingDataset, clamp_factor: float = DEFAULT_CLAMP_FACTOR
) -> TrainReport:
    """Two-coefficient exponential d = a * exp(b * rssi).

    Initialized from the log-linear regression of log d on rssi, refined by
    the trust-region solver with the analytic Jacobian.
    """
    started = time.perf_counter()
    _require_points(train, 3, "exponential")
    rssi, dist = _arrays(train)
    log_d = np.log(dist)
    init_beta = linear_least_squares(np.column_stack([np.ones(rssi.size), rssi]), log_d)
    init = [float(np.exp(init_beta[0])), float(init_beta[1])]

    def residual(theta):
        with np.errstate(over="ignore"):
            return theta[0] * np.exp(theta[1] * rssi) - dist

    def jacobian(theta):
        with np.errstate(over="ignore"):
            e = np.exp(theta[1] * rssi)
            return np.column_stack([e, theta[0] * rssi * e])

    theta, _, status = trust_region_nls(residual, init, jacobian_fn=jacobian)
    params = {"a": float(theta[0]), "b": float(theta[1])}
    return _finish("exponential", train, params, status, started, clamp_factor)


def fit_gaussian_sum(
    train: RangingDataset, k: int = 2, clamp_factor: float = DEFAULT_CLAMP_FACTOR
) -> TrainReport:
    """Sum of k Gaussian bumps; widths parameterized as exp() so they stay positive.

    Centroids start at equally spaced rssi quantiles, widths at
    rssi_range/(2k), amplitudes at the local mean distance around each
    centroid.
    """
    started = time.perf_counter()
    if k < 1:
        raise SolverFailure("gaussian_sum needs k >= 1")
    _require_points(train, 3 * k + 1, "gaussian_sum")
    rssi, dist = _arrays(train)

    quantiles = [(i + 0.5) / k for i in range(k)]
    centroids = np.quantile(rssi, quantiles)
    width = max((rssi.max() - rssi.min()) / (2.0 * k), 1e-6)
    amplitudes = []
    for b in centroids:
        local = dist[np.abs(rssi - b) <= width]
        amplitudes.append(float(local.mean()) if local.size else float(dist.mean()))
    init = np.concatenate([amplitudes, centroids, np.full(k, math.log(width))])

    def unpack(theta):
        # clip keeps exp() away from under/overflow; widths stay strictly positive
        return theta[:k], theta[k : 2 * k], np.exp(np.clip(theta[2 * k :], -27.0, 27.0))

    def residual(theta):
        amps, cents, widths = unpack(theta)
        with np.errstate(over="ignore", under="ignore"):
            pred = np.zeros(rssi.size)
            for a, b, c in zip(amps, cents, widths):
                pred += a * np.exp(-(((rssi - b) / c) ** 2))
        return pred - dist

    def jacobian(theta):
        amps, cents, widths = unpack(theta)
        cols = []
        with np.errstate(over="ignore", under="ignore"):
            for a, b, c in zip(amps, cents, widths):
                u = (rssi - b) / c
                e = np.exp(-(u**2))
                cols.append(e)  # d/da
            for a, b, c in zip(amps, cents, widths):
                u = (rssi - b) / c
                e = np.exp(-(u**2))
                cols.append(a * e * 2.0 * u / c)  # d/db
            for a, b, c in zip(amps, cents, widths):
                u = (rssi - b) / c
                e = np.exp(-(u**2))
                cols.append(a * e * 2.0 * u**2)  # d/d(log c)
        return np.column_stack(cols)

    theta, _, status = trust_region_nls(residual, init, jacobian_fn=jacobian)
    amps, cents, widths = unpack(theta)
    params = {
        "k": k,
        "amplitudes": tuple(float(v) for v in amps),
        "centroids": tuple(float(v) for v in cents),
        "widths": tuple(float(v) for v in widths),
    }
    return _finish("gaussian_sum", train, params, status, started, clamp_factor)


# --- smoothing spline ------------------------------------------------------------


def _collapse_knots(rssi: np.ndarray, dist: np.ndarray):
    """Unique sorted rssi knots with multiplicity weights and mean targets."""
    knots, inverse = np.unique(rssi, return_inverse=True)
    weights = np.bincount(inverse).astype(np.float64)
    targets = np.bincount(inverse, weights=dist) / weights
    within = float(np.sum(dist**2) - np.sum(weights * targets**2))
    return knots, targets, weights, within


def _reinsch_system(knots: np.ndarray, weights: np.ndarray, p: float):
    """Band matrices of the Reinsch equations for the given smoothing p.

    Returns (B_bands, q0, q1, q2) where B = p*R + 6(1-p) * Q' W^-1 Q is a
    pentadiagonal SPD matrix stored as lower bands, and (q0, q1, q2) are the
    three diagonals of the second-difference matrix Q (column j touches rows
    j, j+1, j+2).
    """
    h = np.diff(knots)
    m = knots.size - 2
    q0 = 1.0 / h[:-1]
    q2 = 1.0 / h[1:]
    q1 = -q0 - q2
    inv_w = 1.0 / weights

    bands = np.zeros((3, m))
    # R: tridiagonal with 2(h[i]+h[i+1]) on the diagonal and h off it
    bands[0] = p * 2.0 * (h[:-1] + h[1:])
    bands[1, : m - 1] = p * h[1:-1]
    # Q' W^-1 Q, pentadiagonal
    bands[0] += 6.0 * (1.0 - p) * (q0**2 * inv_w[:-2] + q1**2 * inv_w[1:-1] + q2**2 * inv_w[2:])
    if m > 1:
        bands[1, : m - 1] += 6.0 * (1.0 - p) * (
            q1[:-1] * q0[1:] * inv_w[1:-2] + q2[:-1] * q1[1:] * inv_w[2:-1]
        )
    if m > 2:
        bands[2, : m - 2] += 6.0 * (1.0 - p) * (q2[:-2] * q0[2:] * inv_w[2:-2])
    return bands, q0, q1, q2


def _qt_apply(q0, q1, q2, vec: np.ndarray) -> np.ndarray:
    return q0 * vec[:-2] + q1 * vec[1:-1] + q2 * vec[2:]


def _q_apply(q0, q1, q2, u: np.ndarray, n: int) -> np.ndarray:
    out = np.zeros(n)
    out[:-2] += q0 * u
    out[1:-1] += q1 * u
    out[2:] += q2 * u
    return out


def _solve_spline(knots, targets, weights, p: float):
    """Knot values and second derivatives of the penalized natural spline."""
    bands, q0, q1, q2 = _reinsch_system(knots, weights, p)
    factor = banded_cholesky(2, bands)
    u = solve_banded_factored(2, factor, _qt_apply(q0, q1, q2, targets))
    fitted = targets - 6.0 * (1.0 - p) * _q_apply(q0, q1, q2, u, knots.size) / weights
    second = np.zeros(knots.size)
    second[1:-1] = 6.0 * p * u
    return fitted, second, factor, (q0, q1, q2)


def _gcv_score(knots, targets, weights, within: float, n_records: int, p: float) -> float:
    """Generalized cross-validation score of the smoother on the raw records."""
    fitted, _, factor, (q0, q1, q2) = _solve_spline(knots, targets, weights, p)
    rss = within + float(np.sum(weights * (targets - fitted) ** 2))

    m = knots.size - 2
    qwq = np.zeros((m, m))
    inv_w = 1.0 / weights
    for j in range(m):
        col = np.zeros(knots.size)
        col[j] = q0[j]
        col[j + 1] = q1[j]
        col[j + 2] = q2[j]
        qwq[:, j] = _qt_apply(q0, q1, q2, col * inv_w)
    trace_h = knots.size - 6.0 * (1.0 - p) * float(
        np.trace(solve_banded_factored(2, factor, qwq))
    )
    denom = 1.0 - trace_h / n_records
    if denom <= 1e-12:
        return math.inf
    return (rss / n_records) / denom**2


SPLINE_GCV_GRID = tuple(np.geomspace(1e-6, 1.0 - 1e-6, 31))


def fit_smoothing_spline(
    train: RangingDataset,
    p: float | None = None,
    clamp_factor: float = DEFAULT_CLAMP_FACTOR,
) -> TrainReport:
    """Natural cubic smoothing spline on unique rssi knots (Reinsch form).

    Duplicate rssi values collapse to weighted knot means, which keeps the
    banded system well posed on integer-quantized data.  Minimizes
    p * sum(w * (y - f)^2) + (1 - p) * integral(f''^2); when p is omitted it
    is chosen by generalized cross-validation over a log grid of (1 - p).
    """
    started = time.perf_counter()
    rssi, dist = _arrays(train)
    knots, targets, weights, within = _collapse_knots(rssi, dist)
    if knots.size < 4:
        raise TooFewPoints(
            f"smoothing_spline needs >= 4 unique rssi values, got {knots.size}"
        )
    if p is None:
        scores = [
            _gcv_score(knots, targets, weights, within, rssi.size, 1.0 - one_minus_p)
            for one_minus_p in SPLINE_GCV_GRID
        ]
        p = 1.0 - SPLINE_GCV_GRID[int(np.argmin(scores))]
        status = "gcv"
    else:
        if not 0.0 < p <= 1.0:
            raise SolverFailure(f"smoothing parameter must be in (0, 1], got {p}")
        status = "fixed_p"
    fitted, second, _, _ = _solve_spline(knots, targets, weights, p)
    params = {
        "p": float(p),
        "knots": tuple(float(v) for v in knots),
        "values": tuple(float(v) for v in fitted),
        "second_derivs": tuple(float(v) for v in second),
    }
    return _finish("smoothing_spline", train, params, status, started, clamp_factor)


# --- trees ------------------------------------------------------------------------


@dataclass
class _Node:
    sse: float
    weight: float
    value: float
    threshold: float | None = None
    left: "_Node | None" = None
    right: "_Node | None" = None

    def is_leaf(self) -> bool:
        return self.threshold is None


def _segment_stats(w, wy, wyy, lo, hi):
    sw = float(np.sum(w[lo:hi]))
    swy = float(np.sum(wy[lo:hi]))
    swyy = float(np.sum(wyy[lo:hi]))
    return sw, swy, swyy - swy * swy / sw


def _grow(uniques, w, wy, wyy, lo, hi, depth, max_depth, min_leaf) -> _Node:
    sw, swy, sse = _segment_stats(w, wy, wyy, lo, hi)
    node = _Node(sse=sse, weight=sw, value=swy / sw)
    if depth >= max_depth or sw < 2 * min_leaf:
        return node
    k, split_sse = best_split(w, wy, wyy, lo, hi, float(min_leaf))
    if k < 0 or not sse - split_sse > 0.0:
        return node
    node.threshold = 0.5 * (uniques[k - 1] + uniques[k])
    node.left = _grow(uniques, w, wy, wyy, lo, k, depth + 1, max_depth, min_leaf)
    node.right = _grow(uniques, w, wy, wyy, k, hi, depth + 1, max_depth, min_leaf)
    return node


def _grow_tree(x: np.ndarray, y: np.ndarray, max_depth: int, min_leaf: int) -> _Node:
    uniques, inverse = np.unique(x, return_inverse=True)
    w = np.bincount(inverse).astype(np.float64)
    wy = np.bincount(inverse, weights=y)
    wyy = np.bincount(inverse, weights=y * y)
    return _grow(uniques, w, wy, wyy, 0, uniques.size, 0, max_depth, min_leaf)


def _to_tuple(node: _Node) -> tuple:
    if node.is_leaf():
        return ("leaf", float(node.value))
    return ("split", float(node.threshold), _to_tuple(node.left), _to_tuple(node.right))


def _subtree_stats(node: _Node) -> tuple[int, float]:
    """(leaf count, summed leaf SSE) of the subtree."""
    if node.is_leaf():
        return 1, node.sse
    nl, sl = _subtree_stats(node.left)
    nr, sr = _subtree_stats(node.right)
    return nl + nr, sl + sr


def _weakest_alphas(root: _Node) -> list[float]:
    """Critical complexity values of the cost-complexity pruning sequence."""
    alphas = []

    def clone(node: _Node) -> _Node:
        return _Node(node.sse, node.weight, node.value, node.threshold,
                     clone(node.left) if node.left else None,
                     clone(node.right) if node.right else None)

    tree = clone(root)
    while not tree.is_leaf():
        weakest = math.inf

        def scan(node: _Node):
            nonlocal weakest
            if node.is_leaf():
                return
            leaves, leaf_sse = _subtree_stats(node)
            g = (node.sse - leaf_sse) / (leaves - 1)
            weakest = min(weakest, g)
            scan(node.left)
            scan(node.right)

        scan(tree)
        alphas.append(weakest)

        def collapse(node: _Node):
            if node.is_leaf():
                return
            leaves, leaf_sse = _subtree_stats(node)
            if (node.sse - leaf_sse) / (leaves - 1) <= weakest:
                node.threshold = None
                node.left = None
                node.right = None
                return
            collapse(node.left)
            collapse(node.right)

        collapse(tree)
    return alphas


def _prune(node: _Node, alpha: float) -> _Node:
    """Minimal cost-complexity subtree for complexity alpha."""
    if node.is_leaf():
        return node
    left = _prune(node.left, alpha)
    right = _prune(node.right, alpha)
    pruned = _Node(node.sse, node.weight, node.value, node.threshold, left, right)
    leaves, leaf_sse = _subtree_stats(pruned)
    if (node.sse - leaf_sse) / (leaves - 1) <= alpha:
        return _Node(node.sse, node.weight, node.value)
    return pruned


def _node_predict(node: _Node, x: np.ndarray) -> np.ndarray:
    return _tree_predict(_to_tuple(node), x)


def _choose_alpha_by_cv(x: np.ndarray, y: np.ndarray, root: _Node,
                        max_depth: int, min_leaf: int, n_folds: int = 5) -> float:
    alphas = _weakest_alphas(root)
    positive = sorted({a for a in alphas if a > 0.0})
    if not positive:
        return 0.0
    candidates = [0.0]
    candidates += [math.sqrt(a * b) for a, b in zip(positive[:-1], positive[1:])]
    candidates.append(positive[-1])
    if x.size < n_folds:
        return 0.0

    fold_of = np.arange(x.size) % n_folds
    errors = np.zeros(len(candidates))
    for fold in range(n_folds):
        held = fold_of == fold
        if held.all() or not held.any():
            continue
        fold_root = _grow_tree(x[~held], y[~held], max_depth, min_leaf)
        for ci, alpha in enumerate(candidates):
            pred = _node_predict(_prune(fold_root, alpha), x[held])
            errors[ci] += float(np.sum((pred - y[held]) ** 2))
    best = errors.min()
    # ties prefer the simplest tree, i.e. the largest alpha
    return max(a for a, e in zip(candidates, errors) if e <= best + 1e-12)


def fit_cart(
    train: RangingDataset,
    min_leaf: int = 5,
    max_depth: int = 12,
    prune: bool = True,
    clamp_factor: float = DEFAULT_CLAMP_FACTOR,
) -> TrainReport:
    """Binary regression tree on rssi with cost-complexity pruning.

    Splits scan every midpoint of consecutive unique rssi values and pick
    the largest SSE reduction (ties: lowest threshold); leaves predict the
    mean distance of their records.  The pruning complexity is chosen by
    deterministic 5-fold cross-validation (fold = record index mod 5).
    Datasets smaller than 2*min_leaf yield the root-only tree.
    """
    started = time.perf_counter()
    _require_points(train, 1, "cart")
    rssi, dist = _arrays(train)
    root = _grow_tree(rssi, dist, max_depth, min_leaf)
    status = "grown"
    if prune and not root.is_leaf():
        alpha = _choose_alpha_by_cv(rssi, dist, root, max_depth, min_leaf)
        root = _prune(root, alpha)
        status = "pruned"
    params = {"min_leaf": min_leaf, "max_depth": max_depth, "tree": _to_tuple(root)}
    return _finish("cart", train, params, status, started, clamp_factor)


def fit_lsboost(
    train: RangingDataset,
    n_learners: int = 30,
    learn_rate: float = 0.1,
    base_depth: int = 3,
    min_leaf: int = 5,
    clamp_factor: float = DEFAULT_CLAMP_FACTOR,
) -> TrainReport:
    """Stagewise least-squares boosting of depth-limited regression trees.

    F0 is the mean distance; stage m fits a tree to the residuals of
    F_{m-1} and adds learn_rate times its prediction.  Training MSE is
    non-increasing in the stage count by construction.
    """
    started = time.perf_counter()
    _require_points(train, 1, "lsboost")
    if n_learners < 0:
        raise SolverFailure("n_learners must be >= 0")
    rssi, dist = _arrays(train)
    f0 = float(dist.mean())
    current = np.full(rssi.size, f0)
    trees = []
    for _ in range(n_learners):
        stage = _grow_tree(rssi, dist - current, base_depth, min_leaf)
        tree = _to_tuple(stage)
        trees.append(tree)
        current = current + learn_rate * _tree_predict(tree, rssi)
    params = {
        "init": f0,
        "learn_rate": float(learn_rate),
        "base_depth": base_depth,
        "trees": tuple(trees),
    }
    return _finish("lsboost", train, params, "boosted", started, clamp_factor)


# --- SVR ---------------------------------------------------------------------------


def fit_svr_linear(
    train: RangingDataset,
    c: float = 1.0,
    epsilon: float | None = None,
    tol_kkt: float = 1e-6,
    max_passes: int = 10_000,
    clamp_factor: float = DEFAULT_CLAMP_FACTOR,
) -> TrainReport:
    """Linear eps-tube regression d = w*r + b solved by SMO on z-scored rssi.

    A degenerate input with a single repeated rssi value yields the flat
    model w=0 with the median distance as bias (the minimizer of the
    eps-insensitive loss) instead of a solver failure.
    """
    started = time.perf_counter()
    _require_points(train, 2, "svr_linear")
    rssi, dist = _arrays(train)
    mu = float(rssi.mean())
    sd = float(rssi.std())
    if sd == 0.0:
        params = {
            "weight": 0.0,
            "bias": float(np.median(dist)),
            "c": float(c),
            "epsilon": float(epsilon) if epsilon is not None else 0.1 * float(dist.std()),
        }
        return _finish("svr_linear", train, params, "degenerate", started, clamp_factor)
    z = (rssi - mu) / sd
    problem = SvrProblem(
        tuple(z), tuple(dist), c=c, epsilon=epsilon, tol_kkt=tol_kkt, max_passes=max_passes
    )
    sol = smo_svr(problem)
    weight = sol.weight / sd
    bias = sol.bias - sol.weight * mu / sd
    params = {
        "weight": float(weight),
        "bias": float(bias),
        "c": float(c),
        "epsilon": float(resolve_epsilon(problem)),
    }
    return _finish("svr_linear", train, params, sol.status, started, clamp_factor)


FITTERS = {
    "path_loss": fit_path_loss,
    "linear": fit_linear,
    "polynomial3": fit_polynomial3,
    "exponential": fit_exponential,
    "gaussian_sum": fit_gaussian_sum,
    "smoothing_spline": fit_smoothing_spline,
    "svr_linear": fit_svr_linear,
    "cart": fit_cart,
    "lsboost": fit_lsboost,
}


# --- model files ---------------------------------------------------------------
#
# Versioned text format.  Header line `lpskit-model v1 <kind> <gateway_id>`,
# then one `name = value` line per parameter (floats written with repr so
# the round trip is decimal-exact), then tree sections where applicable:
# `tree <index>` followed by preorder `node <id> split <thr>` /
# `node <id> leaf <value>` lines.

_FLOAT_PARAMS = {
    "path_loss": ("beta0", "beta1"),
    "linear": ("beta0", "beta1"),
    "polynomial3": ("mu", "sd", "c0", "c1", "c2", "c3"),
    "exponential": ("a", "b"),
    "gaussian_sum": (),
    "smoothing_spline": ("p",),
    "svr_linear": ("weight", "bias", "c", "epsilon"),
    "cart": (),
    "lsboost": ("init", "learn_rate"),
}
_INT_PARAMS = {
    "gaussian_sum": ("k",),
    "cart": ("min_leaf", "max_depth"),
    "lsboost": ("base_depth",),
}
_VECTOR_PARAMS = {
    "gaussian_sum": ("amplitudes", "centroids", "widths"),
    "smoothing_spline": ("knots", "values", "second_derivs"),
}


def _tree_lines(tree: tuple) -> list[str]:
    lines: list[str] = []

    def walk(node: tuple) -> None:
        idx = len(lines)
        if node[0] == "leaf":
            lines.append(f"node {idx} leaf {node[1]!r}")
        else:
            lines.append(f"node {idx} split {node[1]!r}")
            walk(node[2])
            walk(node[3])

    walk(tree)
    return lines


def save_model(model: RangingModel, path) -> None:
    if model.kind not in MODEL_KINDS:
        raise SolverFailure(f"unknown model kind {model.kind!r}")
    lines = [f"{MODEL_MAGIC} {MODEL_VERSION} {model.kind} {model.gateway_id}"]
    lines.append(f"train_rmse = {model.train_rmse!r}")
    lines.append(f"train_range_min = {model.train_range[0]!r}")
    lines.append(f"train_range_max = {model.train_range[1]!r}")
    lines.append(f"clamp_factor = {model.clamp_factor!r}")
    for name in _INT_PARAMS.get(model.kind, ()):
        lines.append(f"{name} = {int(model.params[name])}")
    for name in _FLOAT_PARAMS[model.kind]:
        lines.append(f"{name} = {float(model.params[name])!r}")
    for name in _VECTOR_PARAMS.get(model.kind, ()):
        joined = ",".join(repr(float(v)) for v in model.params[name])
        lines.append(f"{name} = {joined}")
    trees: Sequence[tuple] = ()
    if model.kind == "cart":
        trees = (model.params["tree"],)
    elif model.kind == "lsboost":
        trees = model.params["trees"]
        lines.append(f"tree_count = {len(trees)}")
    for index, tree in enumerate(trees):
        lines.append(f"tree {index}")
        lines.extend(_tree_lines(tree))
    Path(path).write_text("\n".join(lines) + "\n", encoding="utf-8")


def _parse_tree_nodes(rows: list[tuple[str, float]], start: int) -> tuple[tuple, int]:
    if start >= len(rows):
        raise ParseError("truncated tree: missing nodes")
    tag, value = rows[start]
    if tag == "leaf":
        return ("leaf", value), start + 1
    left, nxt = _parse_tree_nodes(rows, start + 1)
    right, nxt = _parse_tree_nodes(rows, nxt)
    return ("split", value, left, right), nxt


def load_model(path) -> RangingModel:
    try:
        text = Path(path).read_text(encoding="utf-8")
    except OSError as err:
        raise ParseError(f"cannot read model file {path}: {err}") from err
    lines = [line for line in text.splitlines() if line.strip()]
    if not lines:
        raise ParseError(f"{path}: empty model file")
    header = lines[0].split(" ", 3)
    if len(header) < 3 or header[0] != MODEL_MAGIC:
        raise ParseError(f"{path}: not a model file")
    if header[1] != MODEL_VERSION:
        raise VersionMismatch(f"{path}: unsupported model version {header[1]!r}")
    kind = header[2]
    if kind not in MODEL_KINDS:
        raise ParseError(f"{path}: unknown model kind {kind!r}")
    gateway_id = header[3] if len(header) > 3 else ""

    values: dict[str, str] = {}
    tree_rows: list[list[tuple[str, float]]] = []
    for line in lines[1:]:
        if line.startswith("tree "):
            tree_rows.append([])
            continue
        if line.startswith("node "):
            if not tree_rows:
                raise ParseError(f"{path}: node line outside a tree section")
            parts = line.split()
            if len(parts) != 4 or parts[2] not in ("split", "leaf"):
                raise ParseError(f"{path}: bad node line {line!r}")
            if int(parts[1]) != len(tree_rows[-1]):
                raise ParseError(f"{path}: node ids must be preorder positions")
            tree_rows[-1].append((parts[2], float(parts[3])))
            continue
        if "=" not in line:
            raise ParseError(f"{path}: bad line {line!r}")
        name, raw = (part.strip() for part in line.split("=", 1))
        values[name] = raw

    def need(name: str) -> str:
        if name not in values:
            raise ParseError(f"{path}: missing parameter {name!r}")
        return values[name]

    def need_float(name: str) -> float:
        try:
            return float(need(name))
        except ValueError as err:
            raise ParseError(f"{path}: bad float for {name!r}") from err

    params: dict = {}
    for name in _INT_PARAMS.get(kind, ()):
        params[name] = int(need_float(name))
    for name in _FLOAT_PARAMS[kind]:
        params[name] = need_float(name)
    for name in _VECTOR_PARAMS.get(kind, ()):
        raw = need(name)
        try:
            params[name] = tuple(float(v) for v in raw.split(","))
        except ValueError as err:
            raise ParseError(f"{path}: bad vector for {name!r}") from err

    def build_tree(rows: list[tuple[str, float]]) -> tuple:
        tree, consumed = _parse_tree_nodes(rows, 0)
        if consumed != len(rows):
            raise ParseError(f"{path}: trailing tree nodes")
        return tree

    if kind == "cart":
        if len(tree_rows) != 1:
            raise ParseError(f"{path}: cart model needs exactly one tree section")
        params["tree"] = build_tree(tree_rows[0])
    elif kind == "lsboost":
        count = int(need_float("tree_count"))
        if len(tree_rows) != count:
            raise ParseError(f"{path}: expected {count} trees, found {len(tree_rows)}")
        params["trees"] = tuple(build_tree(rows) for rows in tree_rows)

    return RangingModel(
        kind=kind,
        gateway_id=gateway_id,
        params=params,
        train_rmse=need_float("train_rmse"),
        train_range=(need_float("train_range_min"), need_float("train_range_max")),
        clamp_factor=need_float("clamp_factor"),
    )

