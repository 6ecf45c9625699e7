"""Fingerprint data model: loading, fusing, splitting and summarizing campaigns.

A campaign is a set of raw uplinks (gateway id, message id, RSSI) collected
while a device broadcasts from known points of a site plan.  Fusing raw
uplinks against the plan yields per-gateway ranging datasets of
(RSSI, true distance) pairs, the training material for the ranging models.

All CSV interchange uses UTF-8, LF line endings and `repr`-exact decimal
floats so files round-trip without loss.
"""

from __future__ import annotations

import csv
import math
from dataclasses import dataclass, field
from pathlib import Path
from typing import Iterable, Mapping, Sequence

from .errors import (
    EmptyDataset,
    EmptyTrain,
    ParseError,
    UnknownGateway,
    UnknownPoint,
    ValidationError,
)

ENVIRONMENTS = ("outdoor", "indoor")

SITE_PLAN_HEADER = ["kind", "id", "x_m", "y_m", "env"]
RAW_LOG_HEADER = ["gateway_id", "msg_id", "rssi_dbm"]
FUSED_HEADER = ["gateway_id", "point_id", "rssi_dbm", "distance_m"]

DEFAULT_RSSI_WINDOW = (-140.0, 0.0)


@dataclass(frozen=True)
class SitePlan:
    """Gateway and collection-point coordinates in a local planar frame (m)."""

    site_id: str
    gateways: tuple[tuple[str, float, float], ...]
    points: tuple[tuple[str, float, float], ...]
    environment: str

    def __post_init__(self) -> None:
        if self.environment not in ENVIRONMENTS:
            raise ValidationError(f"unknown environment {self.environment!r}")
        for label, entries in (("gateway", self.gateways), ("point", self.points)):
            seen: set[str] = set()
            for ident, x, y in entries:
                if ident in seen:
                    raise ValidationError(f"duplicate {label} id {ident!r}")
                seen.add(ident)
                if not (math.isfinite(x) and math.isfinite(y)):
                    raise ValidationError(f"non-finite coordinate for {label} {ident!r}")

    def gateway_xy(self, gateway_id: str) -> tuple[float, float]:
        for ident, x, y in self.gateways:
            if ident == gateway_id:
                return (x, y)
        raise UnknownGateway(f"gateway {gateway_id!r} not in site plan {self.site_id!r}")

    def point_xy(self, point_id: str) -> tuple[float, float]:
        for ident, x, y in self.points:
            if ident == point_id:
                return (x, y)
        raise UnknownPoint(f"point {point_id!r} not in site plan {self.site_id!r}")

    def gateway_ids(self) -> tuple[str, ...]:
        return tuple(ident for ident, _, _ in self.gateways)

    def point_ids(self) -> tuple[str, ...]:
        return tuple(ident for ident, _, _ in self.points)

    def distance(self, gateway_id: str, point_id: str) -> float:
        gx, gy = self.gateway_xy(gateway_id)
        px, py = self.point_xy(point_id)
        return math.hypot(px - gx, py - gy)


@dataclass(frozen=True)
class RawUplink:
    """One received uplink: which gateway heard which broadcast, at what power."""

    gateway_id: str
    msg_id: str
    rssi: float

    def __post_init__(self) -> None:
        if not math.isfinite(self.rssi):
            raise ValidationError(f"non-finite rssi for uplink {self.msg_id!r}")


@dataclass(frozen=True)
class FingerprintRecord:
    """A fused training tuple: RSSI at a gateway plus the true distance."""

    gateway_id: str
    point_id: str
    rssi: float
    distance: float

    def __post_init__(self) -> None:
        if not math.isfinite(self.rssi):
            raise ValidationError("non-finite rssi")
        if not (self.distance > 0.0 and math.isfinite(self.distance)):
            raise ValidationError(f"distance must be positive, got {self.distance}")


@dataclass(frozen=True)
class RangingDataset:
    """All fingerprint records of one gateway, in collection order.

    May be noisy and unbalanced: duplicate RSSI values and unequal record
    counts per point are expected and retained.
    """

    gateway_id: str
    records: tuple[FingerprintRecord, ...] = field(default_factory=tuple)

    def __post_init__(self) -> None:
        for rec in self.records:
            if rec.gateway_id != self.gateway_id:
                raise ValidationError(
                    f"record for gateway {rec.gateway_id!r} in dataset {self.gateway_id!r}"
                )

    def __len__(self) -> int:
        return len(self.records)

    def rssi_values(self) -> list[float]:
        return [rec.rssi for rec in self.records]

    def distances(self) -> list[float]:
        return [rec.distance for rec in self.records]

    def point_ids(self) -> tuple[str, ...]:
        """Distinct point ids in first-appearance order."""
        seen: dict[str, None] = {}
        for rec in self.records:
            seen.setdefault(rec.point_id, None)
        return tuple(seen)


@dataclass(frozen=True)
class DatasetSummary:
    n_records: int
    n_points: int
    mean_rssi: float
    min_distance: float
    max_distance: float


def _fmt(value: float) -> str:
    return repr(float(value))


def _parse_float(text: str, path: Path, line_no: int, what: str) -> float:
    try:
        value = float(text)
    except ValueError as err:
        raise ParseError(f"{path}:{line_no}: bad {what} {text!r}") from err
    if not math.isfinite(value):
        raise ValidationError(f"{path}:{line_no}: non-finite {what}")
    return value


def _read_rows(path: Path, expected_header: list[str]) -> list[tuple[int, list[str]]]:
    try:
        text = path.read_text(encoding="utf-8")
    except OSError as err:
        raise ParseError(f"cannot read {path}: {err}") from err
    rows = list(csv.reader(text.splitlines()))
    if not rows:
        raise ParseError(f"{path}: empty file")
    if rows[0] != expected_header:
        raise ParseError(f"{path}: expected header {','.join(expected_header)!r}")
    return [(i + 2, row) for i, row in enumerate(rows[1:]) if row]


def load_site_plan(path: str | Path) -> SitePlan:
    """Parse a site-plan CSV (`kind,id,x_m,y_m,env`) into a validated SitePlan."""
    path = Path(path)
    site_id = None
    environment = None
    gateways: list[tuple[str, float, float]] = []
    points: list[tuple[str, float, float]] = []
    for line_no, row in _read_rows(path, SITE_PLAN_HEADER):
        if len(row) != 5:
            raise ParseError(f"{path}:{line_no}: expected 5 fields, got {len(row)}")
        kind, ident, x_s, y_s, env = row
        if kind == "site":
            if site_id is not None:
                raise ParseError(f"{path}:{line_no}: duplicate site row")
            site_id = ident
            environment = env
        elif kind in ("gateway", "point"):
            x = _parse_float(x_s, path, line_no, "x_m")
            y = _parse_float(y_s, path, line_no, "y_m")
            (gateways if kind == "gateway" else points).append((ident, x, y))
        else:
            raise ParseError(f"{path}:{line_no}: unknown kind {kind!r}")
    if site_id is None or environment is None:
        raise ParseError(f"{path}: missing site row")
    return SitePlan(site_id, tuple(gateways), tuple(points), environment)


def save_site_plan(plan: SitePlan, path: str | Path) -> None:
    lines = [",".join(SITE_PLAN_HEADER)]
    lines.append(f"site,{plan.site_id},,,{plan.environment}")
    for ident, x, y in plan.gateways:
        lines.append(f"gateway,{ident},{_fmt(x)},{_fmt(y)},")
    for ident, x, y in plan.points:
        lines.append(f"point,{ident},{_fmt(x)},{_fmt(y)},")
    Path(path).write_text("\n".join(lines) + "\n", encoding="utf-8")


def load_raw_log(
    path: str | Path,
    rssi_window: tuple[float, float] | None = DEFAULT_RSSI_WINDOW,
) -> list[RawUplink]:
    """Parse a raw-log CSV (`gateway_id,msg_id,rssi_dbm`).

    RSSI values outside `rssi_window` are rejected with ValidationError;
    pass None to disable the window.
    """
    path = Path(path)
    uplinks = []
    for line_no, row in _read_rows(path, RAW_LOG_HEADER):
        if len(row) != 3:
            raise ParseError(f"{path}:{line_no}: expected 3 fields, got {len(row)}")
        gateway_id, msg_id, rssi_s = row
        rssi = _parse_float(rssi_s, path, line_no, "rssi_dbm")
        if rssi_window is not None and not (rssi_window[0] <= rssi <= rssi_window[1]):
            raise ValidationError(
                f"{path}:{line_no}: rssi {rssi} dBm outside window {rssi_window}"
            )
        uplinks.append(RawUplink(gateway_id, msg_id, rssi))
    return uplinks


def save_raw_log(uplinks: Iterable[RawUplink], path: str | Path) -> None:
    lines = [",".join(RAW_LOG_HEADER)]
    for up in uplinks:
        lines.append(f"{up.gateway_id},{up.msg_id},{_fmt(up.rssi)}")
    Path(path).write_text("\n".join(lines) + "\n", encoding="utf-8")


def load_fused(path: str | Path) -> RangingDataset:
    """Parse a per-gateway fused CSV (`gateway_id,point_id,rssi_dbm,distance_m`)."""
    path = Path(path)
    records = []
    for line_no, row in _read_rows(path, FUSED_HEADER):
        if len(row) != 4:
            raise ParseError(f"{path}:{line_no}: expected 4 fields, got {len(row)}")
        gateway_id, point_id, rssi_s, dist_s = row
        rssi = _parse_float(rssi_s, path, line_no, "rssi_dbm")
        dist = _parse_float(dist_s, path, line_no, "distance_m")
        records.append(FingerprintRecord(gateway_id, point_id, rssi, dist))
    if not records:
        raise EmptyDataset(f"{path}: no records")
    gateway_ids = {rec.gateway_id for rec in records}
    if len(gateway_ids) != 1:
        raise ValidationError(f"{path}: multiple gateway ids {sorted(gateway_ids)}")
    return RangingDataset(records[0].gateway_id, tuple(records))


def save_fused(ds: RangingDataset, path: str | Path) -> None:
    lines = [",".join(FUSED_HEADER)]
    for rec in ds.records:
        lines.append(
            f"{rec.gateway_id},{rec.point_id},{_fmt(rec.rssi)},{_fmt(rec.distance)}"
        )
    Path(path).write_text("\n".join(lines) + "\n", encoding="utf-8")


def fuse(
    raw: Sequence[RawUplink],
    plan: SitePlan,
    point_of_msg: Mapping[str, str],
) -> list[RangingDataset]:
    """Attach ground-truth distances to raw uplinks, one dataset per gateway.

    Every uplink becomes a FingerprintRecord whose distance is the planar
    Euclidean distance between its gateway and the point its message was
    broadcast from.  Duplicates are retained; record order is preserved.
    Returns datasets for all plan gateways, in plan order.
    """
    gateway_ids = plan.gateway_ids()
    point_positions = {ident: (x, y) for ident, x, y in plan.points}
    gateway_positions = {ident: (x, y) for ident, x, y in plan.gateways}
    per_gateway: dict[str, list[FingerprintRecord]] = {g: [] for g in gateway_ids}
    for up in raw:
        if up.gateway_id not in gateway_positions:
            raise UnknownGateway(f"uplink from unknown gateway {up.gateway_id!r}")
        point_id = point_of_msg.get(up.msg_id)
        if point_id is None:
            raise UnknownPoint(f"msg {up.msg_id!r} has no mapped point")
        if point_id not in point_positions:
            raise UnknownPoint(f"msg {up.msg_id!r} maps to unknown point {point_id!r}")
        gx, gy = gateway_positions[up.gateway_id]
        px, py = point_positions[point_id]
        dist = math.hypot(px - gx, py - gy)
        per_gateway[up.gateway_id].append(
            FingerprintRecord(up.gateway_id, point_id, up.rssi, dist)
        )
    return [RangingDataset(g, tuple(per_gateway[g])) for g in gateway_ids]


def dedupe_cross_gateway(raw: Sequence[RawUplink]) -> dict[str, list[RawUplink]]:
    """Group uplinks by message instance for macro-diversity handling.

    Receptions of one message by different gateways are kept together; when
    one gateway reports the same message more than once, only its strongest
    (max RSSI) reception survives.
    """
    groups: dict[str, dict[str, RawUplink]] = {}
    for up in raw:
        per_gateway = groups.setdefault(up.msg_id, {})
        best = per_gateway.get(up.gateway_id)
        if best is None or up.rssi > best.rssi:
            per_gateway[up.gateway_id] = up
    return {msg_id: list(per_gw.values()) for msg_id, per_gw in groups.items()}


def split_train_test(
    ds: RangingDataset,
    test_point_ids: Iterable[str],
    seed: int = 0,
) -> tuple[RangingDataset, RangingDataset]:
    """Hold out whole points: records of `test_point_ids` form the test set.

    Deterministic for fixed inputs; `seed` is reserved for optional random
    splits and currently unused.
    """
    del seed
    held_out = set(test_point_ids)
    present = set(ds.point_ids())
    missing = held_out - present
    if missing:
        raise UnknownPoint(f"test points not in dataset: {sorted(missing)}")
    train = [rec for rec in ds.records if rec.point_id not in held_out]
    test = [rec for rec in ds.records if rec.point_id in held_out]
    if not train:
        raise EmptyTrain(f"all points of gateway {ds.gateway_id!r} held out")
    return (
        RangingDataset(ds.gateway_id, tuple(train)),
        RangingDataset(ds.gateway_id, tuple(test)),
    )


def summarize(ds: RangingDataset) -> DatasetSummary:
    """Record/point counts, arithmetic mean RSSI and the distance range."""
    if not ds.records:
        raise EmptyDataset(f"dataset for gateway {ds.gateway_id!r} is empty")
    rssi = ds.rssi_values()
    dist = ds.distances()
    return DatasetSummary(
        n_records=len(ds.records),
        n_points=len(ds.point_ids()),
        mean_rssi=sum(rssi) / len(rssi),
        min_distance=min(dist),
        max_distance=max(dist),
    )
