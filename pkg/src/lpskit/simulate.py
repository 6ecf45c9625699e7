"""Synthetic fingerprint campaigns from a log-distance shadowing channel.

The measured datasets behind the published campaign statistics are not
available, so this module generates stand-ins: every (point, gateway) pair
receives `samples_per_point` uplinks whose RSSI follows the log-distance
power law plus i.i.d. Gaussian shadowing in dB, minus a constant
per-gateway NLOS penalty.  Channels can be calibrated so the noiseless
mean RSSI at a chosen gateway reproduces a published dataset mean.

Generation is seed-deterministic.  Each gateway draws from its own
substream seeded with ``seed XOR stable_hash(gateway_id)`` (SHA-256 based;
Python's builtin hash is salted per process and would break reproducibility),
so per-gateway generation may run in parallel without changing the output.
"""

from __future__ import annotations

import hashlib
import math
from dataclasses import dataclass, field
from pathlib import Path

import numpy as np

from .dataset import DatasetSummary, RawUplink, SitePlan
from .errors import DomainError, NoConvergence, ParseError, ValidationError

DEFAULT_TX_POWER_DBM = 14.0
DEFAULT_EXPONENT = {"outdoor": 2.7, "indoor": 2.0}

PL0_BRACKET = (0.0, 160.0)

_MASK64 = (1 << 64) - 1


@dataclass(frozen=True)
class ChannelParams:
    """Log-distance channel: path loss pl0 at d0, exponent, shadowing sigma."""

    pl0: float
    n_exp: float
    sigma: float
    tx_power: float = DEFAULT_TX_POWER_DBM
    d0: float = 1.0
    quantize: bool = True

    def __post_init__(self) -> None:
        if not self.n_exp > 0:
            raise ValidationError(f"path-loss exponent must be positive, got {self.n_exp}")
        if self.sigma < 0:
            raise ValidationError(f"shadowing sigma must be >= 0, got {self.sigma}")
        if not self.d0 > 0:
            raise ValidationError(f"reference distance must be positive, got {self.d0}")


@dataclass(frozen=True)
class LoraPhyParams:
    sf: int
    bw: float

    def __post_init__(self) -> None:
        if self.sf not in range(7, 13):
            raise ValidationError(f"spreading factor must be in [7, 12], got {self.sf}")
        if self.bw not in (125_000, 250_000, 500_000):
            raise ValidationError(f"bandwidth must be 125/250/500 kHz, got {self.bw}")


@dataclass(frozen=True)
class SimScenario:
    plan: SitePlan
    channel: ChannelParams
    samples_per_point: int
    per_gateway_nlos_penalty: dict[str, float] = field(default_factory=dict)
    seed: int = 0

    def __post_init__(self) -> None:
        if self.samples_per_point < 1:
            raise ValidationError("samples_per_point must be >= 1")
        for gateway_id in self.per_gateway_nlos_penalty:
            self.plan.gateway_xy(gateway_id)


def chirp_duration(phy: LoraPhyParams) -> float:
    """Chirp symbol duration in seconds: 2**SF / BW."""
    return float(2**phy.sf) / float(phy.bw)


def _round_half_away(x: float) -> float:
    if x >= 0.0:
        return math.floor(x + 0.5)
    return math.ceil(x - 0.5)


def rssi_at(channel: ChannelParams, distance: float, noise_draw: float = 0.0) -> float:
    """Received power in dBm at `distance`, given one shadowing draw in dB.

    rssi = tx_power - (pl0 + 10 n log10(d/d0)) + noise_draw, rounded
    half-away-from-zero to integer dBm when the channel quantizes.
    """
    if not (distance > 0.0 and math.isfinite(distance)):
        raise DomainError(f"distance must be positive and finite, got {distance}")
    path_loss = channel.pl0 + 10.0 * channel.n_exp * math.log10(distance / channel.d0)
    rssi = channel.tx_power - path_loss + noise_draw
    if channel.quantize:
        rssi = _round_half_away(rssi)
    return rssi


def gateway_subseed(seed: int, gateway_id: str) -> int:
    """Deterministic per-gateway substream seed (part of the output contract)."""
    digest = hashlib.sha256(gateway_id.encode("utf-8")).digest()
    return (seed ^ int.from_bytes(digest[:8], "big")) & _MASK64


def generate_campaign(sc: SimScenario) -> tuple[list[RawUplink], dict[str, str]]:
    """Simulate one measurement campaign.

    Every point broadcasts `samples_per_point` messages; every gateway hears
    each of them through an independent shadowing draw.  Returns the uplinks
    in chronological order (point, sample, then gateway in plan order) and
    the msg_id -> point_id map needed for fusing.
    """
    plan = sc.plan
    points = plan.points
    if not points:
        raise ValidationError("scenario plan has no collection points")
    n_msgs = len(points) * sc.samples_per_point

    draws: dict[str, np.ndarray] = {}
    for gateway_id in plan.gateway_ids():
        rng = np.random.default_rng(gateway_subseed(sc.seed, gateway_id))
        draws[gateway_id] = rng.normal(0.0, sc.channel.sigma, size=n_msgs)

    uplinks: list[RawUplink] = []
    point_of_msg: dict[str, str] = {}
    msg_index = 0
    for point_id, px, py in points:
        for k in range(sc.samples_per_point):
            msg_id = f"{point_id}:{k:04d}"
            point_of_msg[msg_id] = point_id
            for gateway_id, gx, gy in plan.gateways:
                dist = math.hypot(px - gx, py - gy)
                penalty = sc.per_gateway_nlos_penalty.get(gateway_id, 0.0)
                noise = float(draws[gateway_id][msg_index]) - penalty
                rssi = rssi_at(sc.channel, dist, noise)
                uplinks.append(RawUplink(gateway_id, msg_id, rssi))
            msg_index += 1
    return uplinks, point_of_msg


def _noiseless_mean_rssi(
    plan: SitePlan, gateway_id: str, pl0: float, n_exp: float, tx_power: float, d0: float
) -> float:
    total = 0.0
    for point_id, _, _ in plan.points:
        dist = plan.distance(gateway_id, point_id)
        total += tx_power - (pl0 + 10.0 * n_exp * math.log10(dist / d0))
    return total / len(plan.points)


def solve_pl0(
    plan: SitePlan,
    gateway_id: str,
    target_mean_rssi: float,
    n_exp: float,
    tx_power: float = DEFAULT_TX_POWER_DBM,
    d0: float = 1.0,
) -> float:
    """Bisect pl0 in [0, 160] dB so the noiseless plan mean hits the target."""
    if not plan.points:
        raise ValidationError("site plan has no points to average over")
    plan.gateway_xy(gateway_id)
    lo, hi = PL0_BRACKET

    def gap(pl0: float) -> float:
        return _noiseless_mean_rssi(plan, gateway_id, pl0, n_exp, tx_power, d0) - target_mean_rssi

    g_lo, g_hi = gap(lo), gap(hi)
    if g_lo < 0.0 or g_hi > 0.0:
        raise NoConvergence(
            f"target mean {target_mean_rssi} dBm not reachable with pl0 in {PL0_BRACKET}"
        )
    for _ in range(200):
        mid = 0.5 * (lo + hi)
        if gap(mid) >= 0.0:
            lo = mid
        else:
            hi = mid
        if hi - lo < 1e-12:
            break
    return 0.5 * (lo + hi)


def calibrate_to_stats(
    target: DatasetSummary,
    plan: SitePlan,
    gateway_id: str,
    n_exp: float | None = None,
    tx_power: float = DEFAULT_TX_POWER_DBM,
    d0: float = 1.0,
    sigma: float = 0.0,
    quantize: bool = True,
) -> ChannelParams:
    """Channel whose noiseless mean RSSI over the plan matches a dataset mean.

    The exponent is held at the supplied value or the environment prior
    (2.7 outdoor / 2.0 indoor); only pl0 is solved for.
    """
    if target.n_records < 1:
        raise ValidationError("target summary has no records")
    if n_exp is None:
        n_exp = DEFAULT_EXPONENT[plan.environment]
    pl0 = solve_pl0(plan, gateway_id, target.mean_rssi, n_exp, tx_power, d0)
    return ChannelParams(
        pl0=pl0, n_exp=n_exp, sigma=sigma, tx_power=tx_power, d0=d0, quantize=quantize
    )


# --- scenario files -------------------------------------------------------
#
# Flat `key = value` lines, `#` starts a comment, blank lines ignored.
# Coordinates are `x,y` pairs in meters:
#
#   site_id = campus-north
#   environment = outdoor
#   gateway.A = 0, 0
#   point.P01 = 52.5, 80
#   samples_per_point = 54
#   seed = 7
#   sigma_db = 6
#   n_exp = 2.7                      # optional, defaults by environment
#   pl0_db = 30                      # or calibrate instead:
#   calibrate_gateway = C
#   calibrate_mean_rssi = -89.92
#   nlos.B = 8                       # dB penalty, default 0
#   test_points = TP1, TP2           # held out by the pipeline command

_SCALAR_KEYS = {
    "site_id",
    "environment",
    "samples_per_point",
    "seed",
    "tx_power_dbm",
    "pl0_db",
    "d0_m",
    "n_exp",
    "sigma_db",
    "quantize",
    "calibrate_gateway",
    "calibrate_mean_rssi",
    "test_points",
}


def parse_scenario(text: str, name: str = "<scenario>") -> tuple[SimScenario, tuple[str, ...]]:
    """Parse scenario text into (SimScenario, held-out test point ids)."""
    values: dict[str, str] = {}
    gateways: list[tuple[str, float, float]] = []
    points: list[tuple[str, float, float]] = []
    nlos: dict[str, float] = {}

    def parse_xy(raw: str, line_no: int) -> tuple[float, float]:
        parts = [p.strip() for p in raw.split(",")]
        if len(parts) != 2:
            raise ParseError(f"{name}:{line_no}: expected 'x, y', got {raw!r}")
        try:
            return float(parts[0]), float(parts[1])
        except ValueError as err:
            raise ParseError(f"{name}:{line_no}: bad coordinate {raw!r}") from err

    for line_no, line in enumerate(text.splitlines(), start=1):
        line = line.split("#", 1)[0].strip()
        if not line:
            continue
        if "=" not in line:
            raise ParseError(f"{name}:{line_no}: expected 'key = value'")
        key, raw = (part.strip() for part in line.split("=", 1))
        if key.startswith("gateway."):
            x, y = parse_xy(raw, line_no)
            gateways.append((key[len("gateway.") :], x, y))
        elif key.startswith("point."):
            x, y = parse_xy(raw, line_no)
            points.append((key[len("point.") :], x, y))
        elif key.startswith("nlos."):
            try:
                nlos[key[len("nlos.") :]] = float(raw)
            except ValueError as err:
                raise ParseError(f"{name}:{line_no}: bad penalty {raw!r}") from err
        elif key in _SCALAR_KEYS:
            if key in values:
                raise ParseError(f"{name}:{line_no}: duplicate key {key!r}")
            values[key] = raw
        else:
            raise ParseError(f"{name}:{line_no}: unknown key {key!r}")

    def require(key: str) -> str:
        if key not in values:
            raise ParseError(f"{name}: missing required key {key!r}")
        return values[key]

    def number(key: str, default: float | None = None) -> float:
        if key not in values:
            if default is None:
                raise ParseError(f"{name}: missing required key {key!r}")
            return default
        try:
            return float(values[key])
        except ValueError as err:
            raise ParseError(f"{name}: bad number for {key!r}: {values[key]!r}") from err

    plan = SitePlan(
        site_id=require("site_id"),
        gateways=tuple(gateways),
        points=tuple(points),
        environment=require("environment"),
    )
    if not gateways:
        raise ParseError(f"{name}: no gateways defined")
    if not points:
        raise ParseError(f"{name}: no points defined")

    n_exp = number("n_exp", DEFAULT_EXPONENT[plan.environment])
    tx_power = number("tx_power_dbm", DEFAULT_TX_POWER_DBM)
    d0 = number("d0_m", 1.0)
    quantize_raw = values.get("quantize", "true").lower()
    if quantize_raw not in ("true", "false"):
        raise ParseError(f"{name}: quantize must be true or false, got {quantize_raw!r}")
    quantize = quantize_raw == "true"

    if "pl0_db" in values:
        pl0 = number("pl0_db")
    elif "calibrate_gateway" in values:
        pl0 = solve_pl0(
            plan, require("calibrate_gateway"), number("calibrate_mean_rssi"), n_exp, tx_power, d0
        )
    else:
        raise ParseError(f"{name}: need pl0_db or calibrate_gateway/calibrate_mean_rssi")

    channel = ChannelParams(
        pl0=pl0,
        n_exp=n_exp,
        sigma=number("sigma_db", 0.0),
        tx_power=tx_power,
        d0=d0,
        quantize=quantize,
    )
    scenario = SimScenario(
        plan=plan,
        channel=channel,
        samples_per_point=int(number("samples_per_point")),
        per_gateway_nlos_penalty=nlos,
        seed=int(number("seed", 0.0)),
    )
    test_points = tuple(
        p.strip() for p in values.get("test_points", "").split(",") if p.strip()
    )
    for point_id in test_points:
        plan.point_xy(point_id)
    return scenario, test_points


def load_scenario(path: str | Path) -> tuple[SimScenario, tuple[str, ...]]:
    path = Path(path)
    try:
        text = path.read_text(encoding="utf-8")
    except OSError as err:
        raise ParseError(f"cannot read scenario {path}: {err}") from err
    return parse_scenario(text, name=str(path))
