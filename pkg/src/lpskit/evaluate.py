"""Evaluation artifacts: per-gateway ranging RMSE, test-point error profiles,
and the positioning-accuracy table (one row per model kind and environment).

Percent accuracy needs a reference distance to normalize against and the
published tables do not pin one down (their meter and percent columns imply
inconsistent normalizers), so the normalization policy is explicit
configuration and mean_error in meters stays the primary metric.
"""

from __future__ import annotations

import math
from dataclasses import dataclass
from pathlib import Path
from typing import Mapping, Sequence

import numpy as np

from .dataset import RangingDataset, SitePlan
from .errors import EmptyDataset, InsufficientGateways, MissingGateway, ParseError
from .position import position_from_rssi
from .ranging import MODEL_KINDS, RangingModel, predict_distance

ACCURACY_HEADER = "environment,model,kind_mean_error_m,percent_accuracy"
PROFILE_HEADER = "point_id,gateway_id,error_m"

_ENV_ORDER = {"outdoor": 0, "indoor": 1}


@dataclass(frozen=True)
class AccuracyRow:
    environment: str
    model_kind: str
    mean_error: float
    percent_accuracy: float


@dataclass(frozen=True)
class TestPointProfile:
    point_id: str
    per_gateway_error: dict[str, float]


def ranging_rmse(model: RangingModel, ds: RangingDataset) -> float:
    """Root mean squared ranging error of the model over a dataset, in meters."""
    if not ds.records:
        raise EmptyDataset(f"dataset for gateway {ds.gateway_id!r} is empty")
    rssi = np.asarray(ds.rssi_values())
    dist = np.asarray(ds.distances())
    return float(np.sqrt(np.mean((predict_distance(model, rssi) - dist) ** 2)))


def _mean_rssi_by_point(ds: RangingDataset) -> dict[str, float]:
    sums: dict[str, list[float]] = {}
    for rec in ds.records:
        sums.setdefault(rec.point_id, []).append(rec.rssi)
    return {pid: sum(vals) / len(vals) for pid, vals in sums.items()}


def testpoint_profile(
    models: Mapping[str, RangingModel],
    test: Mapping[str, RangingDataset],
    plan: SitePlan,
) -> list[TestPointProfile]:
    """Per test point, the absolute ranging error each gateway contributes.

    Errors are computed from the mean RSSI of the point at that gateway,
    matching the mean-RSSI-first positioning rule.
    """
    for gateway_id in test:
        if gateway_id not in models:
            raise MissingGateway(f"no model for gateway {gateway_id!r}")
    gateway_order = [g for g in plan.gateway_ids() if g in test]
    means = {g: _mean_rssi_by_point(test[g]) for g in gateway_order}
    point_order = [
        pid
        for pid in plan.point_ids()
        if any(pid in means[g] for g in gateway_order)
    ]
    profiles = []
    for point_id in point_order:
        errors: dict[str, float] = {}
        for gateway_id in gateway_order:
            if point_id not in means[gateway_id]:
                continue
            predicted = predict_distance(models[gateway_id], means[gateway_id][point_id])
            errors[gateway_id] = abs(predicted - plan.distance(gateway_id, point_id))
        profiles.append(TestPointProfile(point_id, errors))
    return profiles


def _reference_distance(policy: str, plan: SitePlan, point_xy: tuple[float, float]) -> float:
    if policy == "centroid":
        gx = sum(x for _, x, _ in plan.gateways) / len(plan.gateways)
        gy = sum(y for _, _, y in plan.gateways) / len(plan.gateways)
        return math.hypot(point_xy[0] - gx, point_xy[1] - gy)
    if policy == "site-diagonal":
        xs = [x for _, x, _ in plan.gateways] + [x for _, x, _ in plan.points]
        ys = [y for _, _, y in plan.gateways] + [y for _, _, y in plan.points]
        return math.hypot(max(xs) - min(xs), max(ys) - min(ys))
    if policy.startswith("fixed:"):
        return float(policy.split(":", 1)[1])
    raise ParseError(f"unknown d_norm_policy {policy!r}")


def positioning_accuracy(
    models: Mapping[str, RangingModel],
    plan: SitePlan,
    test: Mapping[str, RangingDataset],
    d_norm_policy: str = "centroid",
) -> AccuracyRow:
    """Mean positioning error and percent accuracy over the test points.

    Each test point is located from its mean RSSI per gateway; the percent
    score of a point is 100 * max(0, 1 - error/ref) with ref set by
    d_norm_policy ('centroid', 'site-diagonal' or 'fixed:<meters>').
    """
    means = {g: _mean_rssi_by_point(ds) for g, ds in test.items()}
    point_ids = [
        pid
        for pid in plan.point_ids()
        if sum(pid in by_point for by_point in means.values()) >= 3
    ]
    if not point_ids:
        raise InsufficientGateways("no test point has readings from >= 3 gateways")
    kinds = {m.kind for m in models.values()}
    if len(kinds) != 1:
        raise MissingGateway(f"mixed model kinds in one accuracy row: {sorted(kinds)}")

    errors = []
    percents = []
    for point_id in point_ids:
        readings = {
            g: by_point[point_id] for g, by_point in means.items() if point_id in by_point
        }
        fix = position_from_rssi(models, plan, readings)
        px, py = plan.point_xy(point_id)
        error = math.hypot(fix.x - px, fix.y - py)
        ref = _reference_distance(d_norm_policy, plan, (px, py))
        if ref > 0:
            percent = 100.0 * max(0.0, 1.0 - error / ref)
        else:
            percent = 100.0 if error == 0.0 else 0.0
        errors.append(error)
        percents.append(percent)
    return AccuracyRow(
        environment=plan.environment,
        model_kind=next(iter(kinds)),
        mean_error=float(np.mean(errors)),
        percent_accuracy=float(np.mean(percents)),
    )


def _row_key(row: AccuracyRow) -> tuple[int, int]:
    return (_ENV_ORDER.get(row.environment, 99), MODEL_KINDS.index(row.model_kind))


def write_accuracy_csv(rows: Sequence[AccuracyRow], path: str | Path) -> Path:
    """Accuracy table ordered by environment then fixed model-kind order."""
    lines = [ACCURACY_HEADER]
    for row in sorted(rows, key=_row_key):
        lines.append(
            f"{row.environment},{row.model_kind},{row.mean_error!r},{row.percent_accuracy!r}"
        )
    path = Path(path)
    path.write_text("\n".join(lines) + "\n", encoding="utf-8")
    return path


def emit_report(
    rows: Sequence[AccuracyRow],
    profiles: Mapping[str, Sequence[TestPointProfile]],
    out_dir: str | Path,
) -> list[Path]:
    """Write accuracy.csv plus one profile_<environment>.csv per environment.

    Output is deterministic: rows and profile files are ordered by
    environment (outdoor first) then by the fixed model-kind table order,
    floats written with repr so parsing reconstructs the rows exactly.
    Returns the written paths.
    """
    out_dir = Path(out_dir)
    out_dir.mkdir(parents=True, exist_ok=True)
    written = [write_accuracy_csv(rows, out_dir / "accuracy.csv")]

    for environment in sorted(profiles, key=lambda e: _ENV_ORDER.get(e, 99)):
        lines = [PROFILE_HEADER]
        for profile in profiles[environment]:
            for gateway_id, error in profile.per_gateway_error.items():
                lines.append(f"{profile.point_id},{gateway_id},{error!r}")
        path = out_dir / f"profile_{environment}.csv"
        path.write_text("\n".join(lines) + "\n", encoding="utf-8")
        written.append(path)
    return written


def parse_accuracy_csv(path: str | Path) -> list[AccuracyRow]:
    """Inverse of the accuracy.csv writer (exact float round trip)."""
    path = Path(path)
    try:
        lines = path.read_text(encoding="utf-8").splitlines()
    except OSError as err:
        raise ParseError(f"cannot read {path}: {err}") from err
    if not lines or lines[0] != ACCURACY_HEADER:
        raise ParseError(f"{path}: expected header {ACCURACY_HEADER!r}")
    rows = []
    for line_no, line in enumerate(lines[1:], start=2):
        if not line:
            continue
        parts = line.split(",")
        if len(parts) != 4:
            raise ParseError(f"{path}:{line_no}: expected 4 fields")
        rows.append(
            AccuracyRow(parts[0], parts[1], float(parts[2]), float(parts[3]))
        )
    return rows
