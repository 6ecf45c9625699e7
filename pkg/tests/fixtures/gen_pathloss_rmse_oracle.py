#!/usr/bin/env python3
"""Monte Carlo oracle for the path-loss ranging RMSE on the outdoor preset.

For each gateway of the outdoor-paper preset, draws 1e5 independent
receptions from the preset channel over the 21 training points, fits the
population rssi ~ log10(distance) line, and records the RMSE of the
inverted (and clamped) distance predictions.  The campaign-trained model's
RMSE must land within +-10% of these values.

    python tests/fixtures/gen_pathloss_rmse_oracle.py
"""

import json
import math
import sys
from pathlib import Path

import numpy as np

sys.path.insert(0, str(Path(__file__).resolve().parents[2] / "src"))
from lpskit.cli import load_preset  # noqa: E402

OUT = Path(__file__).parent / "pathloss_rmse_oracle.json"
N_DRAWS = 100_000
CLAMP_FACTOR = 2.0


def main() -> int:
    scenario, test_points = load_preset("outdoor-paper")
    plan = scenario.plan
    channel = scenario.channel
    train_points = [p for p in plan.point_ids() if p not in set(test_points)]

    rng = np.random.default_rng(20260808)
    values = {}
    for gateway_id in plan.gateway_ids():
        distances = np.array([plan.distance(gateway_id, p) for p in train_points])
        penalty = scenario.per_gateway_nlos_penalty.get(gateway_id, 0.0)
        picks = rng.integers(0, distances.size, N_DRAWS)
        d = distances[picks]
        clean = channel.tx_power - (
            channel.pl0 + 10.0 * channel.n_exp * np.log10(d / channel.d0)
        )
        rssi = clean - penalty + rng.normal(0.0, channel.sigma, N_DRAWS)
        if channel.quantize:
            rssi = np.where(rssi >= 0, np.floor(rssi + 0.5), np.ceil(rssi - 0.5))
        design = np.column_stack([np.ones(N_DRAWS), np.log10(d)])
        beta, *_ = np.linalg.lstsq(design, rssi, rcond=None)
        with np.errstate(over="ignore"):
            predicted = 10.0 ** ((rssi - beta[0]) / beta[1])
        predicted = np.clip(predicted, 0.0, CLAMP_FACTOR * distances.max())
        rmse = float(np.sqrt(np.mean((predicted - d) ** 2)))
        values[gateway_id] = rmse
        print(f"gateway {gateway_id}: beta=({beta[0]:.3f}, {beta[1]:.3f}) oracle RMSE {rmse:.4f} m")

    OUT.write_text(json.dumps({"n_draws": N_DRAWS, "rmse_m": values}, indent=1) + "\n")
    print(f"wrote {OUT}")
    return 0


if __name__ == "__main__":
    raise SystemExit(main())
