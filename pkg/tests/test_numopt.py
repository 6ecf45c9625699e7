import numpy as np
import pytest

from lpskit.errors import NonFiniteError, NotPositiveDefinite, ValidationError
from lpskit.numopt import (
    BandedSystem,
    SvrProblem,
    TrustRegionConfig,
    finite_difference_jacobian,
    linear_least_squares,
    smo_svr,
    solve_banded,
    solve_banded_factored,
    banded_cholesky,
    svr_dual_objective,
    trust_region_nls,
)

import oracles


class TestLinearLeastSquares:
    def test_exact_line(self):
        design = np.array([[1.0, 0.0], [1.0, 1.0], [1.0, 2.0]])
        beta = linear_least_squares(design, np.array([0.0, 1.0, 2.0]))
        assert np.allclose(beta, [0.0, 1.0], atol=1e-12)

    def test_constant_fit(self):
        rng = np.random.default_rng(0)
        design = np.column_stack([np.ones(20), rng.normal(size=20)])
        beta = linear_least_squares(design, np.full(20, 3.5))
        assert np.allclose(beta, [3.5, 0.0], atol=1e-12)

    def test_matches_normal_equations_oracle(self):
        rng = np.random.default_rng(42)
        design = rng.normal(size=(50, 4))
        y = rng.normal(size=50)
        beta = linear_least_squares(design, y)
        assert np.max(np.abs(beta - oracles.normal_equations_solve(design, y))) < 1e-8

    def test_residual_orthogonal_to_columns(self):
        rng = np.random.default_rng(7)
        design = rng.normal(size=(80, 5))
        y = rng.normal(size=80)
        beta = linear_least_squares(design, y)
        residual = design @ beta - y
        assert np.linalg.norm(design.T @ residual) <= 1e-8 * np.linalg.norm(y)

    def test_rank_deficient_minimum_norm(self):
        rng = np.random.default_rng(5)
        col = rng.normal(size=30)
        design = np.column_stack([col, col])  # exactly rank 1
        y = rng.normal(size=30)
        beta = linear_least_squares(design, y)
        expected = np.linalg.pinv(design) @ y
        assert np.allclose(beta, expected, atol=1e-10)

    def test_non_finite_rejected(self):
        with pytest.raises(NonFiniteError):
            linear_least_squares(np.array([[1.0], [np.nan]]), np.array([1.0, 2.0]))

    def test_underdetermined_rejected(self):
        with pytest.raises(ValidationError):
            linear_least_squares(np.ones((2, 3)), np.ones(2))


class TestTrustRegion:
    def test_scalar_linear_residual(self):
        theta, sse, status = trust_region_nls(lambda t: t - 3.0, [0.0])
        assert abs(theta[0] - 3.0) < 1e-10
        assert sse < 1e-18
        assert status in ("converged_grad", "converged_step")

    def test_noiseless_exponential_recovery(self):
        x = np.linspace(-60.0, -20.0, 30)
        y = 2.0 * np.exp(-0.1 * x)

        def residual(theta):
            return theta[0] * np.exp(theta[1] * x) - y

        theta, sse, _ = trust_region_nls(residual, [1.0, -0.05])
        assert abs(theta[0] - 2.0) < 1e-6
        assert abs(theta[1] + 0.1) < 1e-8

    def test_noisy_exponential_matches_grid_oracle(self):
        rng = np.random.default_rng(9)
        rssi = np.linspace(-95.0, -55.0, 40)
        dist = 420.0 * np.exp(0.045 * rssi) * np.exp(rng.normal(0.0, 0.15, size=40))

        def residual(theta):
            return theta[0] * np.exp(theta[1] * rssi) - dist

        ln_d = np.log(dist)
        slope, intercept = np.polyfit(rssi, ln_d, 1)
        init = [float(np.exp(intercept)), float(slope)]
        theta, sse, _ = trust_region_nls(residual, init)
        _, oracle_sse = oracles.exponential_fit_grid_oracle(
            rssi, dist, a_range=(1.0, 2000.0), b_range=(0.005, 0.12)
        )
        assert abs(sse - oracle_sse) < 1e-6

    def test_accepted_sse_trace_monotone(self):
        rng = np.random.default_rng(3)
        x = np.linspace(0.0, 5.0, 25)
        y = 3.0 * np.exp(-0.7 * x) + rng.normal(0.0, 0.05, size=25)

        def residual(theta):
            return theta[0] * np.exp(theta[1] * x) - y

        trace: list[float] = []
        _, final_sse, _ = trust_region_nls(residual, [1.0, 0.0], trace=trace)
        assert len(trace) >= 2
        assert all(a >= b for a, b in zip(trace, trace[1:]))
        r0 = residual(np.array([1.0, 0.0]))
        assert final_sse <= float(r0 @ r0)

    def test_finite_difference_matches_analytic(self):
        rng = np.random.default_rng(12)
        x = rng.uniform(0.5, 2.0, size=15)

        def residual(theta):
            return theta[0] * np.exp(theta[1] * x) + theta[2] * x**2

        def analytic(theta):
            return np.column_stack(
                [np.exp(theta[1] * x), theta[0] * x * np.exp(theta[1] * x), x**2]
            )

        for _ in range(5):
            theta = rng.uniform(-1.0, 1.0, size=3)
            fd = finite_difference_jacobian(residual, theta)
            exact = analytic(theta)
            scale = np.maximum(np.abs(exact), 1.0)
            assert np.max(np.abs(fd - exact) / scale) < 1e-4

    def test_max_iterations_status(self):
        rng = np.random.default_rng(1)
        x = np.linspace(0.0, 1.0, 50)
        y = np.sin(7 * x) + rng.normal(0.0, 0.2, 50)

        def residual(theta):
            return theta[0] * np.sin(theta[1] * x) - y

        cfg = TrustRegionConfig(max_iter=2)
        theta, sse, status = trust_region_nls(residual, [0.1, 1.0], cfg=cfg)
        assert status == "max_iterations"
        r0 = residual(np.array([0.1, 1.0]))
        assert sse <= float(r0 @ r0)

    def test_non_finite_init_rejected(self):
        with pytest.raises(NonFiniteError):
            trust_region_nls(lambda t: np.array([np.inf]), [1.0])

    def test_config_validation(self):
        with pytest.raises(ValidationError):
            TrustRegionConfig(radius_shrink=1.5)
        with pytest.raises(ValidationError):
            TrustRegionConfig(max_iter=0)
        with pytest.raises(ValidationError):
            TrustRegionConfig(radius_grow=0.9)


class TestSmoSvr:
    def test_inside_tube_zero_duals(self):
        x = np.linspace(0.0, 1.0, 10)
        y = 0.01 * x + 5.0  # spread well inside the default tube
        problem = SvrProblem(tuple(x), tuple(y), epsilon=0.1)
        sol = smo_svr(problem)
        assert sol.status == "converged"
        assert np.all(sol.dual_coeffs == 0.0)
        assert np.max(np.abs(sol.predict(x) - y)) <= 0.1 + 1e-12

    def test_matches_projected_gradient_oracle(self):
        for seed in range(6):
            rng = np.random.default_rng(100 + seed)
            n = int(rng.integers(8, 13))
            x = rng.uniform(-2.0, 2.0, size=n)
            y = 1.5 * x - 0.7 + rng.normal(0.0, 0.4, size=n)
            problem = SvrProblem(tuple(x), tuple(y), c=1.0, epsilon=0.2, tol_kkt=1e-9)
            sol = smo_svr(problem)
            epsilon = 0.2
            mine = svr_dual_objective(x, y, epsilon, sol.dual_coeffs)
            _, reference = oracles.qp_dual_reference(x, y, 1.0, epsilon)
            assert abs(mine - reference) < 1e-5

    def test_box_saturation_on_conflicting_duplicates(self):
        problem = SvrProblem((1.0, 1.0), (0.0, 10.0), c=1.0, epsilon=0.1)
        sol = smo_svr(problem)
        assert sol.status == "converged"
        assert np.max(np.abs(sol.dual_coeffs)) <= 1.0 + 1e-12
        assert np.isclose(np.abs(sol.dual_coeffs), 1.0).all()

    def test_kkt_invariants_at_convergence(self):
        rng = np.random.default_rng(77)
        x = rng.uniform(-1.5, 1.5, size=40)
        y = -2.0 * x + 0.3 + rng.normal(0.0, 0.3, size=40)
        problem = SvrProblem(tuple(x), tuple(y), c=2.0, epsilon=0.1, tol_kkt=1e-8)
        sol = smo_svr(problem)
        assert sol.status == "converged"
        assert sol.kkt_violation <= 1e-8
        beta = sol.dual_coeffs
        assert np.all(np.abs(beta) <= 2.0 + 1e-12)  # alpha, alpha* within [0, C]
        assert abs(np.sum(beta)) < 1e-12
        # strong fit: slope and intercept near the generating line
        assert abs(sol.weight - (-2.0)) < 0.2

    def test_max_passes_flag(self):
        rng = np.random.default_rng(2)
        x = rng.uniform(-1.0, 1.0, size=60)
        y = 3.0 * x + rng.normal(0.0, 0.5, size=60)
        problem = SvrProblem(tuple(x), tuple(y), c=5.0, epsilon=0.01, max_passes=3)
        sol = smo_svr(problem)
        assert sol.status == "max_passes"
        assert sol.iterations == 3

    def test_default_epsilon_is_tenth_of_std(self):
        x = (0.0, 1.0, 2.0, 3.0)
        y = (0.0, 2.0, 4.0, 6.0)
        from lpskit.numopt import resolve_epsilon

        assert resolve_epsilon(SvrProblem(x, y)) == pytest.approx(0.1 * np.std(y))

    def test_validation(self):
        with pytest.raises(ValidationError):
            SvrProblem((1.0,), (2.0,))
        with pytest.raises(ValidationError):
            SvrProblem((1.0, 2.0), (1.0, 2.0), c=0.0)
        with pytest.raises(NonFiniteError):
            SvrProblem((1.0, np.nan), (1.0, 2.0))


class TestSolveBanded:
    def test_identity_band(self):
        rhs = np.array([3.0, -1.0, 2.0])
        system = BandedSystem(0, np.ones((1, 3)), rhs)
        assert np.allclose(solve_banded(system), rhs, atol=1e-14)

    def test_tridiagonal_laplacian_matches_dense(self):
        n = 5
        diagonals = np.zeros((2, n))
        diagonals[0] = 2.0
        diagonals[1, : n - 1] = -1.0
        rhs = np.ones(n)
        solution = solve_banded(BandedSystem(1, diagonals, rhs))
        dense = oracles.band_to_dense(1, diagonals)
        expected = np.linalg.solve(dense, rhs)
        assert np.max(np.abs(solution - expected)) < 1e-10 * np.max(np.abs(expected))

    def test_random_spd_band_matches_dense(self):
        rng = np.random.default_rng(21)
        n, bw = 30, 2
        diagonals = rng.normal(size=(bw + 1, n))
        diagonals[0] = np.abs(diagonals[0]) + 4.0  # diagonally dominant => SPD
        rhs = rng.normal(size=n)
        solution = solve_banded(BandedSystem(bw, diagonals, rhs))
        dense = oracles.band_to_dense(bw, diagonals)
        expected = np.linalg.solve(dense, rhs)
        rel = np.max(np.abs(solution - expected)) / np.max(np.abs(expected))
        assert rel < 1e-10

    def test_multi_rhs_factored_solve(self):
        rng = np.random.default_rng(4)
        n, bw = 12, 2
        diagonals = rng.normal(size=(bw + 1, n))
        diagonals[0] = np.abs(diagonals[0]) + 5.0
        rhs = rng.normal(size=(n, 3))
        factor = banded_cholesky(bw, diagonals)
        solution = solve_banded_factored(bw, factor, rhs)
        dense = oracles.band_to_dense(bw, diagonals)
        assert np.allclose(solution, np.linalg.solve(dense, rhs), atol=1e-10)

    def test_not_positive_definite(self):
        diagonals = np.array([[1.0, -1.0, 1.0]])
        with pytest.raises(NotPositiveDefinite):
            solve_banded(BandedSystem(0, diagonals, np.ones(3)))
