"""The compiled kernels must reproduce the numpy fallback bit for bit."""

import numpy as np
import pytest

from lpskit._core import BACKEND, _pykernels

try:
    from lpskit._core import _kernels
except ImportError:
    _kernels = None

needs_compiled = pytest.mark.skipif(
    _kernels is None, reason="compiled kernels not built"
)


def smo_problems():
    problems = []
    for seed in range(8):
        rng = np.random.default_rng(500 + seed)
        n = int(rng.integers(5, 60))
        x = rng.uniform(-2.5, 2.5, n)
        y = 2.0 * x - 1.0 + rng.normal(0.0, 0.5, n)
        problems.append((x, y, float(rng.uniform(0.5, 4.0)), float(rng.uniform(0.05, 0.5))))
    # duplicates and conflicts
    problems.append((np.array([1.0, 1.0, 1.0]), np.array([0.0, 5.0, 10.0]), 1.0, 0.1))
    problems.append((np.zeros(4), np.array([1.0, 2.0, 3.0, 4.0]), 2.0, 0.2))
    return problems


@needs_compiled
def test_backend_is_compiled_by_default():
    import os

    if os.environ.get("LPSKIT_PURE") == "1":
        pytest.skip("pure backend forced via LPSKIT_PURE")
    assert BACKEND == "compiled"


@needs_compiled
def test_smo_solve_bitwise_parity():
    for x, y, c, eps in smo_problems():
        pure = _pykernels.smo_solve(x, y, c, eps, 1e-8, 20_000)
        fast = _kernels.smo_solve(x, y, c, eps, 1e-8, 20_000)
        assert np.array_equal(pure[0], fast[0]), "beta mismatch"
        assert pure[1] == fast[1]  # weight
        assert pure[2] == fast[2]  # iterations
        assert pure[3] == fast[3]  # kkt violation
        assert pure[4] == fast[4]  # converged flag


@needs_compiled
def test_best_split_bitwise_parity():
    rng = np.random.default_rng(99)
    for _ in range(50):
        m = int(rng.integers(2, 80))
        w = rng.integers(1, 10, m).astype(np.float64)
        means = rng.normal(50.0, 30.0, m)
        wy = w * means
        wyy = w * (means**2 + rng.uniform(0.0, 25.0, m))
        lo = int(rng.integers(0, m))
        hi = int(rng.integers(lo + 1, m + 1))
        min_weight = float(rng.integers(1, 6))
        pure = _pykernels.best_split(w, wy, wyy, lo, hi, min_weight)
        fast = _kernels.best_split(w, wy, wyy, lo, hi, min_weight)
        assert pure[0] == fast[0]
        if np.isfinite(pure[1]):
            assert pure[1] == fast[1]
        else:
            assert not np.isfinite(fast[1])


@needs_compiled
def test_training_identical_across_backends(monkeypatch):
    """A full tree fit routed through either kernel gives identical models."""
    import lpskit.ranging as ranging
    from conftest import make_dataset

    rng = np.random.default_rng(7)
    pairs = [(float(np.round(r)), float(d)) for r, d in zip(
        rng.uniform(-110, -60, 200), rng.uniform(10, 250, 200))]
    ds = make_dataset("A", pairs)

    monkeypatch.setattr(ranging, "best_split", _pykernels.best_split)
    tree_pure = ranging.fit_cart(ds).model.params["tree"]
    monkeypatch.setattr(ranging, "best_split", _kernels.best_split)
    tree_fast = ranging.fit_cart(ds).model.params["tree"]
    assert tree_pure == tree_fast
