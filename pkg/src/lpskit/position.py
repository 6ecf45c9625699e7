"""Trilateration: planar coordinates from per-gateway distance estimates.

With noisy ranges the three circles rarely intersect in one point, so the
fix is the nonlinear-least-squares minimizer of the range residuals
sum((||p - g_i|| - d_i)^2), seeded by the linearized closed-form solution
(first circle equation subtracted from the rest).  More than three
gateways turn the same operation into multilateration.
"""

from __future__ import annotations

import math
from dataclasses import dataclass
from typing import Mapping, Sequence

import numpy as np

from .dataset import SitePlan
from .errors import (
    DegenerateGeometry,
    DimensionMismatch,
    DomainError,
    InsufficientGateways,
    MissingGateway,
)
from .numopt import TrustRegionConfig, linear_least_squares, trust_region_nls
from .ranging import RangingModel, predict_distance

EXACT_RESIDUAL_RMS = 1e-9
COLLINEARITY_TOL = 1e-9

_REFINE_CFG = TrustRegionConfig(max_iter=100, tol_grad=1e-13, tol_step=1e-14)


@dataclass(frozen=True)
class PositionFix:
    x: float
    y: float
    residual_rms: float
    status: str  # exact | least_squares | ill_conditioned
    n_gateways: int


def _collinear(gateways: np.ndarray) -> bool:
    centered = gateways - gateways.mean(axis=0)
    singular = np.linalg.svd(centered, compute_uv=False)
    if singular[0] == 0.0:
        return True
    return singular[1] / singular[0] < COLLINEARITY_TOL


def trilaterate(
    gateways: Sequence[tuple[float, float]], distances: Sequence[float]
) -> PositionFix:
    """Least-squares position from >= 3 gateway coordinates and range estimates.

    Collinear gateway geometry is reported as status 'ill_conditioned'
    (the solve still runs; downstream consumers decide what to do with it).
    """
    g = np.asarray(gateways, dtype=np.float64)
    d = np.asarray(distances, dtype=np.float64)
    if g.ndim != 2 or g.shape[1] != 2 or g.shape[0] != d.shape[0]:
        raise DimensionMismatch(
            f"got {g.shape[0] if g.ndim == 2 else '?'} gateways, {d.shape[0]} distances"
        )
    if len({(float(x), float(y)) for x, y in g}) < 3:
        raise DegenerateGeometry("need at least 3 distinct gateway positions")
    if not (np.isfinite(g).all() and np.isfinite(d).all()):
        raise DomainError("non-finite gateway coordinates or distances")
    if np.any(d <= 0.0):
        raise DomainError("distances must be positive")

    ill_conditioned = _collinear(g)

    # linearized initializer: subtract the first circle equation from the rest
    design = 2.0 * (g[1:] - g[0])
    rhs = (
        d[0] ** 2
        - d[1:] ** 2
        + np.sum(g[1:] ** 2, axis=1)
        - float(np.sum(g[0] ** 2))
    )
    init = linear_least_squares(design, rhs)

    def residual(p):
        return np.sqrt(np.sum((p - g) ** 2, axis=1)) - d

    def jacobian(p):
        diff = p - g
        norms = np.maximum(np.sqrt(np.sum(diff**2, axis=1)), 1e-30)
        return diff / norms[:, None]

    point, sse, _ = trust_region_nls(residual, init, jacobian_fn=jacobian, cfg=_REFINE_CFG)

    # Undamped Gauss-Newton polish: near the minimum, SSE differences drown
    # in float noise before the position stops moving, and the equivariance
    # contract (1e-9) needs the stationary point to machine precision.
    polished = point.copy()
    for _ in range(8):
        r = residual(polished)
        jac = jacobian(polished)
        try:
            step = np.linalg.solve(jac.T @ jac, -(jac.T @ r))
        except np.linalg.LinAlgError:
            break
        if not np.isfinite(step).all() or np.max(np.abs(step)) > 1.0:
            break
        polished = polished + step
        if np.max(np.abs(step)) < 1e-12 * (1.0 + np.max(np.abs(polished))):
            break
    # accept unless the polish genuinely diverged; plain <= would reject
    # equal-to-last-ulp SSE values and keep the less stationary point
    sse_polished = float(np.sum(residual(polished) ** 2))
    if sse_polished <= sse + 1e-9 * (sse + 1.0):
        point, sse = polished, sse_polished

    residual_rms = math.sqrt(sse / d.size)
    if ill_conditioned:
        status = "ill_conditioned"
    elif residual_rms < EXACT_RESIDUAL_RMS:
        status = "exact"
    else:
        status = "least_squares"
    return PositionFix(float(point[0]), float(point[1]), residual_rms, status, int(d.size))


def mean_reading(value) -> float:
    """Collapse one or many RSSI readings of a gateway to their mean."""
    if isinstance(value, (int, float)):
        return float(value)
    values = list(value)
    return sum(float(v) for v in values) / len(values)


def position_from_rssi(
    models: Mapping[str, RangingModel],
    plan: SitePlan,
    readings: Mapping[str, float | Sequence[float]],
) -> PositionFix:
    """Predict per-gateway distances from RSSI readings, then trilaterate.

    Multiple readings of one gateway are averaged before ranging; gateways
    without readings are ignored.  Needs at least three usable gateways.
    """
    plan_gateways = set(plan.gateway_ids())
    usable = []
    for gateway_id in plan.gateway_ids():
        if gateway_id not in readings:
            continue
        if gateway_id not in models:
            raise MissingGateway(f"no trained model for gateway {gateway_id!r}")
        usable.append(gateway_id)
    unknown = set(readings) - plan_gateways
    if unknown:
        raise MissingGateway(f"readings for gateways not in plan: {sorted(unknown)}")
    if len(usable) < 3:
        raise InsufficientGateways(f"need >= 3 gateways with readings, got {len(usable)}")
    coords = [plan.gateway_xy(gid) for gid in usable]
    ranges = [
        max(predict_distance(models[gid], mean_reading(readings[gid])), 1e-6)
        for gid in usable
    ]
    return trilaterate(coords, ranges)
