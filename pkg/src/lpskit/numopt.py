"""Numerical kernels shared by the ranging models.

Four solvers live here: dense linear least squares, a damped trust-region
Gauss-Newton loop for nonlinear least squares, an SMO solver for the
eps-tube linear-kernel regression dual, and a banded symmetric-positive-
definite factorization used by the smoothing spline.  All are
deterministic and reentrant; callers may run many instances in parallel
on disjoint inputs.
"""

from __future__ import annotations

import math
from dataclasses import dataclass
from typing import Callable, Sequence

import numpy as np

from ._core import smo_solve
from .errors import NonFiniteError, NotPositiveDefinite, ValidationError

Vector = np.ndarray
ResidualFn = Callable[[np.ndarray], np.ndarray]
JacobianFn = Callable[[np.ndarray], np.ndarray]


# --- linear least squares ---------------------------------------------------


def linear_least_squares(design: np.ndarray, y: np.ndarray) -> np.ndarray:
    """Minimize ||design @ beta - y||_2 by orthogonal factorization.

    Rank-deficient systems resolve to the minimum-norm solution, so results
    are reproducible across runs and platforms.
    """
    design = np.asarray(design, dtype=np.float64)
    y = np.asarray(y, dtype=np.float64)
    if design.ndim != 2 or y.ndim != 1 or design.shape[0] != y.shape[0]:
        raise ValidationError(f"bad least-squares shapes {design.shape} / {y.shape}")
    if design.shape[0] < design.shape[1]:
        raise ValidationError("underdetermined system: need n >= p rows")
    if not (np.isfinite(design).all() and np.isfinite(y).all()):
        raise NonFiniteError("non-finite entries in least-squares input")
    beta, *_ = np.linalg.lstsq(design, y, rcond=None)
    return beta


# --- trust-region nonlinear least squares -----------------------------------


@dataclass(frozen=True)
class TrustRegionConfig:
    max_iter: int = 200
    radius0: float = 1.0
    tol_grad: float = 1e-10
    tol_step: float = 1e-12
    radius_shrink: float = 0.25
    radius_grow: float = 2.0
    accept_ratio: float = 1e-4

    def __post_init__(self) -> None:
        values = (
            self.max_iter,
            self.radius0,
            self.tol_grad,
            self.tol_step,
            self.radius_shrink,
            self.radius_grow,
            self.accept_ratio,
        )
        if any(v <= 0 for v in values):
            raise ValidationError("trust-region parameters must all be positive")
        if not self.radius_shrink < 1.0 < self.radius_grow:
            raise ValidationError("need radius_shrink < 1 < radius_grow")


def finite_difference_jacobian(
    residual_fn: ResidualFn, theta: np.ndarray, rel_step: float = 1e-6
) -> np.ndarray:
    """Central-difference Jacobian with per-parameter step rel_step*max(1, |theta_j|)."""
    theta = np.asarray(theta, dtype=np.float64)
    columns = []
    for j in range(theta.size):
        step = rel_step * max(1.0, abs(theta[j]))
        plus = theta.copy()
        minus = theta.copy()
        plus[j] += step
        minus[j] -= step
        columns.append((np.asarray(residual_fn(plus)) - np.asarray(residual_fn(minus))) / (2.0 * step))
    return np.column_stack(columns)


def trust_region_nls(
    residual_fn: ResidualFn,
    init: Sequence[float] | np.ndarray,
    jacobian_fn: JacobianFn | None = None,
    cfg: TrustRegionConfig | None = None,
    trace: list[float] | None = None,
) -> tuple[np.ndarray, float, str]:
    """Levenberg-Marquardt-style trust-region descent on sum-of-squares.

    Each iteration solves the damped normal equations
    (J'J + diag(J'J)/radius) step = -J'r and accepts the step when the
    actual SSE reduction is at least accept_ratio times the reduction
    predicted by the Gauss-Newton model; acceptance grows the radius,
    rejection shrinks it and retries.  The accepted-objective trace is
    non-increasing, so the returned SSE never exceeds SSE(init).

    Returns (params, final_sse, status) with status one of
    'converged_grad', 'converged_step', 'max_iterations'.  When `trace` is
    given, the SSE after every accepted step is appended to it.
    """
    cfg = cfg or TrustRegionConfig()
    theta = np.asarray(init, dtype=np.float64).copy()
    if jacobian_fn is None:
        jacobian_fn = lambda t: finite_difference_jacobian(residual_fn, t)

    r = np.asarray(residual_fn(theta), dtype=np.float64)
    if not np.isfinite(r).all():
        raise NonFiniteError("residuals are non-finite at the initial point")
    sse = float(r @ r)
    if trace is not None:
        trace.append(sse)
    radius = cfg.radius0
    status = "max_iterations"

    for _ in range(cfg.max_iter):
        jac = np.asarray(jacobian_fn(theta), dtype=np.float64)
        if not np.isfinite(jac).all():
            raise NonFiniteError("Jacobian is non-finite")
        grad = jac.T @ r
        if np.max(np.abs(grad)) <= cfg.tol_grad:
            status = "converged_grad"
            break
        jtj = jac.T @ jac
        damp_scale = np.diag(jtj).copy()
        damp_scale[damp_scale < 1e-12] = 1e-12

        accepted = False
        while radius > 1e-16:
            damping = 1.0 / radius
            try:
                step = np.linalg.solve(jtj + damping * np.diag(damp_scale), -grad)
            except np.linalg.LinAlgError:
                radius *= cfg.radius_shrink
                continue
            predicted = sse - float(np.sum((r + jac @ step) ** 2))
            theta_new = theta + step
            r_new = np.asarray(residual_fn(theta_new), dtype=np.float64)
            if np.isfinite(r_new).all() and predicted > 0.0:
                sse_new = float(r_new @ r_new)
                actual = sse - sse_new
                if actual / predicted >= cfg.accept_ratio:
                    theta, r, sse = theta_new, r_new, sse_new
                    radius = min(radius * cfg.radius_grow, 1e12)
                    accepted = True
                    if trace is not None:
                        trace.append(sse)
                    step_norm = float(np.linalg.norm(step))
                    if step_norm <= cfg.tol_step * (float(np.linalg.norm(theta)) + cfg.tol_step):
                        status = "converged_step"
                    elif actual <= 1e-15 * (sse + 1e-300):
                        status = "converged_step"
                    break
            radius *= cfg.radius_shrink
        if not accepted:
            status = "converged_step"
            break
        if status == "converged_step":
            break

    return theta, sse, status


# --- SMO for the eps-tube linear-kernel regression dual ----------------------


@dataclass(frozen=True)
class SvrProblem:
    """One-dimensional eps-tube regression problem for the SMO solver.

    `epsilon=None` resolves to 0.1 times the target standard deviation at
    solve time.
    """

    x: tuple[float, ...]
    y: tuple[float, ...]
    c: float = 1.0
    epsilon: float | None = None
    tol_kkt: float = 1e-6
    max_passes: int = 10_000

    def __post_init__(self) -> None:
        object.__setattr__(self, "x", tuple(float(v) for v in self.x))
        object.__setattr__(self, "y", tuple(float(v) for v in self.y))
        if len(self.x) != len(self.y) or len(self.x) < 2:
            raise ValidationError("need matching x/y with at least 2 samples")
        if not all(math.isfinite(v) for v in self.x + self.y):
            raise NonFiniteError("non-finite sample in SVR problem")
        if self.c <= 0:
            raise ValidationError("regularization c must be positive")
        if self.epsilon is not None and self.epsilon < 0:
            raise ValidationError("epsilon must be >= 0")
        if self.max_passes < 1:
            raise ValidationError("max_passes must be >= 1")


@dataclass(frozen=True)
class SvrSolution:
    dual_coeffs: np.ndarray
    bias: float
    weight: float
    status: str
    iterations: int
    kkt_violation: float

    def predict(self, x: np.ndarray | float) -> np.ndarray | float:
        return self.weight * np.asarray(x, dtype=np.float64) + self.bias


def resolve_epsilon(p: SvrProblem) -> float:
    if p.epsilon is not None:
        return p.epsilon
    return 0.1 * float(np.std(np.asarray(p.y)))


def svr_dual_objective(x: np.ndarray, y: np.ndarray, epsilon: float, beta: np.ndarray) -> float:
    """0.5 b'Kb - y'b + eps*||b||_1 with the linear kernel K = outer(x, x)."""
    s = float(np.dot(beta, x))
    return 0.5 * s * s - float(np.dot(y, beta)) + epsilon * float(np.sum(np.abs(beta)))


def smo_svr(p: SvrProblem) -> SvrSolution:
    """Solve the eps-tube dual by analytic two-multiplier updates.

    Works on beta = alpha - alpha* and always picks the maximal
    KKT-violating pair, so runs are deterministic.  The bias comes from
    support vectors strictly inside the box (they sit exactly on the tube
    boundary); if none exist it is the midpoint of the KKT-feasible bias
    interval.
    """
    x = np.asarray(p.x, dtype=np.float64)
    y = np.asarray(p.y, dtype=np.float64)
    epsilon = resolve_epsilon(p)
    beta, weight, iterations, violation, converged = smo_solve(
        x, y, p.c, epsilon, p.tol_kkt, p.max_passes
    )
    if converged:
        status = "converged"
    elif iterations >= p.max_passes:
        status = "max_passes"
    else:
        status = "stalled"

    g = weight * x - y
    margin = 1e-10 * p.c
    interior = (np.abs(beta) > margin) & (np.abs(beta) < p.c - margin)
    if interior.any():
        bias = float(np.mean(y[interior] - weight * x[interior] - epsilon * np.sign(beta[interior])))
    else:
        up = np.where(beta >= 0.0, g + epsilon, g - epsilon)
        dn = np.where(beta <= 0.0, -g + epsilon, -g - epsilon)
        lam_lo = -np.min(up[beta < p.c]) if (beta < p.c).any() else -np.inf
        lam_hi = np.min(dn[beta > -p.c]) if (beta > -p.c).any() else np.inf
        if math.isinf(lam_lo) and math.isinf(lam_hi):
            bias = 0.0
        elif math.isinf(lam_lo):
            bias = float(lam_hi)
        elif math.isinf(lam_hi):
            bias = float(lam_lo)
        else:
            bias = 0.5 * (float(lam_lo) + float(lam_hi))
    return SvrSolution(beta, bias, weight, status, iterations, violation)


# --- banded SPD systems ------------------------------------------------------


@dataclass(frozen=True)
class BandedSystem:
    """Symmetric positive definite system in lower-band storage.

    `diagonals[d, i]` holds A[i+d, i] for d = 0..bandwidth; entries past
    the matrix edge are ignored.
    """

    bandwidth: int
    diagonals: np.ndarray
    rhs: np.ndarray

    def __post_init__(self) -> None:
        diagonals = np.asarray(self.diagonals, dtype=np.float64)
        rhs = np.asarray(self.rhs, dtype=np.float64)
        if diagonals.ndim != 2 or diagonals.shape[0] != self.bandwidth + 1:
            raise ValidationError("diagonals must have shape (bandwidth+1, n)")
        if rhs.shape[0] != diagonals.shape[1]:
            raise ValidationError("rhs length does not match system size")
        object.__setattr__(self, "diagonals", diagonals)
        object.__setattr__(self, "rhs", rhs)


def banded_cholesky(bandwidth: int, diagonals: np.ndarray) -> np.ndarray:
    """Lower-band Cholesky factor of an SPD band matrix (same storage layout)."""
    diagonals = np.asarray(diagonals, dtype=np.float64)
    n = diagonals.shape[1]
    factor = np.zeros_like(diagonals)
    for j in range(n):
        acc = diagonals[0, j]
        for k in range(max(0, j - bandwidth), j):
            acc -= factor[j - k, k] ** 2
        if not acc > 0.0:
            raise NotPositiveDefinite(f"pivot {acc} at column {j}")
        factor[0, j] = math.sqrt(acc)
        for i in range(j + 1, min(j + bandwidth + 1, n)):
            acc = diagonals[i - j, j]
            for k in range(max(0, i - bandwidth), j):
                acc -= factor[i - k, k] * factor[j - k, k]
            factor[i - j, j] = acc / factor[0, j]
    return factor


def solve_banded_factored(bandwidth: int, factor: np.ndarray, rhs: np.ndarray) -> np.ndarray:
    """Solve L L' z = rhs given the band Cholesky factor; rhs may be 2D."""
    n = factor.shape[1]
    z = np.array(rhs, dtype=np.float64, copy=True)
    for i in range(n):
        for d in range(1, min(bandwidth, i) + 1):
            z[i] = z[i] - factor[d, i - d] * z[i - d]
        z[i] = z[i] / factor[0, i]
    for i in range(n - 1, -1, -1):
        for d in range(1, min(bandwidth, n - 1 - i) + 1):
            z[i] = z[i] - factor[d, i] * z[i + d]
        z[i] = z[i] / factor[0, i]
    return z


def solve_banded(sys: BandedSystem) -> np.ndarray:
    """Exact solve of a banded SPD system via band Cholesky."""
    factor = banded_cholesky(sys.bandwidth, sys.diagonals)
    return solve_banded_factored(sys.bandwidth, factor, sys.rhs)
