import numpy as np
import pytest

from lpskit.dataset import FingerprintRecord, RangingDataset, SitePlan


@pytest.fixture
def small_plan() -> SitePlan:
    return SitePlan(
        site_id="unit",
        gateways=(("A", 0.0, 0.0), ("B", 200.0, 0.0), ("C", 0.0, 150.0)),
        points=(("P1", 50.0, 50.0), ("P2", 120.0, 30.0), ("P3", 60.0, 110.0)),
        environment="outdoor",
    )


def make_dataset(gateway_id: str, pairs, point_ids=None) -> RangingDataset:
    """Build a RangingDataset from (rssi, distance) pairs."""
    records = []
    for idx, (rssi, dist) in enumerate(pairs):
        point_id = point_ids[idx] if point_ids is not None else f"P{idx:03d}"
        records.append(FingerprintRecord(gateway_id, point_id, float(rssi), float(dist)))
    return RangingDataset(gateway_id, tuple(records))


def power_law_dataset(
    gateway_id="A",
    n_points=20,
    tx_power=14.0,
    pl0=40.0,
    n_exp=2.0,
    d_min=10.0,
    d_max=300.0,
    sigma=0.0,
    seed=0,
    samples_per_point=1,
):
    """Synthetic (rssi, distance) records following the log-distance law."""
    rng = np.random.default_rng(seed)
    distances = np.geomspace(d_min, d_max, n_points)
    pairs = []
    point_ids = []
    for i, d in enumerate(distances):
        for k in range(samples_per_point):
            clean = tx_power - (pl0 + 10.0 * n_exp * np.log10(d))
            noise = rng.normal(0.0, sigma) if sigma > 0 else 0.0
            pairs.append((clean + noise, d))
            point_ids.append(f"P{i:03d}")
    return make_dataset(gateway_id, pairs, point_ids)
