#!/usr/bin/env python3
"""Benchmark the compiled kernels against the numpy fallback.

Times the two hot training loops (SMO pair updates and CART growth via the
split scan) on campaign-sized data, once per backend, and prints a table.

    python benchmarks/bench_kernels.py [--repeat N]
"""

import argparse
import time

import numpy as np

from lpskit._core import _pykernels

try:
    from lpskit._core import _kernels
except ImportError:
    _kernels = None


def campaign_like(n=1404, seed=1):
    rng = np.random.default_rng(seed)
    dist = rng.uniform(16.0, 280.0, n)
    rssi = np.round(14.0 - (46.0 + 27.0 * np.log10(dist)) + rng.normal(0.0, 6.0, n))
    return rssi, dist


def bench_smo(kernel, repeat):
    rssi, dist = campaign_like()
    z = (rssi - rssi.mean()) / rssi.std()
    best = np.inf
    for _ in range(repeat):
        t0 = time.perf_counter()
        beta, s, iters, viol, conv = kernel.smo_solve(z, dist, 1.0, 5.0, 1e-6, 10_000)
        best = min(best, time.perf_counter() - t0)
    return best, iters


def bench_cart(kernel, repeat):
    import lpskit.ranging as ranging
    from lpskit.dataset import FingerprintRecord, RangingDataset

    rssi, dist = campaign_like()
    records = tuple(
        FingerprintRecord("A", f"P{i % 26:02d}", float(r), float(d))
        for i, (r, d) in enumerate(zip(rssi, dist))
    )
    ds = RangingDataset("A", records)
    original = ranging.best_split
    ranging.best_split = kernel.best_split
    try:
        best = np.inf
        for _ in range(repeat):
            t0 = time.perf_counter()
            ranging.fit_lsboost(ds, n_learners=30)
            best = min(best, time.perf_counter() - t0)
    finally:
        ranging.best_split = original
    return best


def main() -> int:
    parser = argparse.ArgumentParser(description=__doc__)
    parser.add_argument("--repeat", type=int, default=3)
    args = parser.parse_args()

    backends = [("pure-python", _pykernels)]
    if _kernels is not None:
        backends.append(("compiled", _kernels))
    else:
        print("compiled kernels not built; run `pip install -e .` with Cython available")

    rows = []
    for name, kernel in backends:
        smo_time, iters = bench_smo(kernel, args.repeat)
        cart_time = bench_cart(kernel, args.repeat)
        rows.append((name, smo_time, iters, cart_time))

    print(f"{'backend':<14} {'smo_solve (n=1404)':>20} {'iterations':>12} {'lsboost 30 trees':>18}")
    for name, smo_time, iters, cart_time in rows:
        print(f"{name:<14} {smo_time * 1e3:>17.1f} ms {iters:>12} {cart_time * 1e3:>15.1f} ms")
    if len(rows) == 2:
        print(
            f"{'speedup':<14} {rows[0][1] / rows[1][1]:>18.1f}x "
            f"{'':>12} {rows[0][3] / rows[1][3]:>14.1f}x"
        )
    return 0


if __name__ == "__main__":
    raise SystemExit(main())
