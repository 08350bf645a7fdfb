"""Finite-sum test objectives f(x) = (1/m) sum_j f_j(x) with known constants.

Every objective exposes per-sample gradients (for stochastic methods), the
full gradient, the global smoothness L, the per-sample smoothness
L_component (what single-sample step sizes must respect), and the strong
convexity constant ell (0 if none).  Quadratic problems also carry their
minimizer and optimal value so runs can report exact suboptimality.
"""

from __future__ import annotations

import enum
from typing import Sequence

import numpy as np

from .rng import substream


class ObjectiveKind(enum.Enum):
    LEAST_SQUARES = "least_squares"
    LOGISTIC = "logistic"
    NONCONVEX = "nonconvex"


class Objective:
    """Base finite-sum objective; subclasses fill in values and gradients."""

    kind: ObjectiveKind

    def __init__(self, A: np.ndarray, b: np.ndarray, lam: float = 0.0):
        self.A = np.asarray(A, dtype=np.float64)
        self.b = np.asarray(b, dtype=np.float64)
        if self.A.ndim != 2 or len(self.b) != self.A.shape[0]:
            raise ValueError("need A of shape (m, n) and b of length m")
        if lam < 0:
            raise ValueError(f"regularizer must be >= 0, got {lam}")
        self.lam = float(lam)
        self.L = 0.0  # smoothness of f
        self.L_component = 0.0  # max smoothness of a single f_j
        self.ell = 0.0  # strong convexity (0 = none)
        self.f_star: float | None = None
        self.x_star: np.ndarray | None = None
        self.B: float | None = None  # probed second-moment bound, set by trainers

    @property
    def m(self) -> int:
        return self.A.shape[0]

    @property
    def n(self) -> int:
        return self.A.shape[1]

    def value(self, x: np.ndarray) -> float:
        raise NotImplementedError

    def full_gradient(self, x: np.ndarray) -> np.ndarray:
        raise NotImplementedError

    def minibatch_gradient(self, idx: Sequence[int], x: np.ndarray) -> np.ndarray:
        """Mean of the per-sample gradients over `idx` (with-replacement ok)."""
        raise NotImplementedError

    def sample_gradient(self, j: int, x: np.ndarray) -> np.ndarray:
        return self.minibatch_gradient(np.asarray([j]), x)

    def suboptimality(self, x: np.ndarray) -> float:
        if self.f_star is None:
            raise ValueError(f"{type(self).__name__} has no known optimal value")
        return self.value(x) - self.f_star


class LeastSquares(Objective):
    """f(x) = (1/2m) ||Ax - b||^2 + (lam/2) ||x||^2, sampled row by row."""

    kind = ObjectiveKind.LEAST_SQUARES

    def __init__(self, A, b, lam: float = 0.0):
        super().__init__(A, b, lam)
        hessian = self.A.T @ self.A / self.m
        eigs = np.linalg.eigvalsh(hessian)
        self.L = float(eigs[-1]) + self.lam
        self.ell = max(float(eigs[0]), 0.0) + self.lam
        self.L_component = float(np.max(np.sum(self.A**2, axis=1))) + self.lam
        if self.ell > 0:
            self.x_star = np.linalg.solve(
                hessian + self.lam * np.eye(self.n), self.A.T @ self.b / self.m
            )
            self.f_star = self.value(self.x_star)

    def value(self, x):
        r = self.A @ x - self.b
        return float(0.5 * np.mean(r**2) + 0.5 * self.lam * np.dot(x, x))

    def full_gradient(self, x):
        return self.A.T @ (self.A @ x - self.b) / self.m + self.lam * x

    def minibatch_gradient(self, idx, x):
        idx = np.asarray(idx, dtype=np.intp)
        rows = self.A[idx]
        r = rows @ x - self.b[idx]
        return rows.T @ r / len(idx) + self.lam * x


class LogisticRegression(Objective):
    """f(x) = (1/m) sum_j log(1 + exp(-b_j a_j.x)) + (lam/2)||x||^2, b in {-1,+1}."""

    kind = ObjectiveKind.LOGISTIC

    def __init__(self, A, b, lam: float = 0.0):
        super().__init__(A, b, lam)
        if not np.all(np.isin(self.b, (-1.0, 1.0))):
            raise ValueError("logistic labels must be -1 or +1")
        gram_top = float(np.linalg.eigvalsh(self.A.T @ self.A / self.m)[-1])
        self.L = 0.25 * gram_top + self.lam
        self.L_component = 0.25 * float(np.max(np.sum(self.A**2, axis=1))) + self.lam
        self.ell = self.lam

    def value(self, x):
        z = self.b * (self.A @ x)
        return float(np.mean(np.logaddexp(0.0, -z)) + 0.5 * self.lam * np.dot(x, x))

    def full_gradient(self, x):
        z = self.b * (self.A @ x)
        coef = -self.b / (1.0 + np.exp(z))  # -b * sigmoid(-z)
        return self.A.T @ coef / self.m + self.lam * x

    def minibatch_gradient(self, idx, x):
        idx = np.asarray(idx, dtype=np.intp)
        rows = self.A[idx]
        z = self.b[idx] * (rows @ x)
        coef = -self.b[idx] / (1.0 + np.exp(z))
        return rows.T @ coef / len(idx) + self.lam * x


class NonconvexTest(Objective):
    """Smooth non-convex test function with a finite-sum noise structure.

    f_j(x) = sum_i (x_i^2 + 0.5 cos(3 x_i)) + c_j.x with zero-sum tilts c_j,
    so f(x) = sum_i (x_i^2 + 0.5 cos(3 x_i)) and single-sample gradients are
    unbiased with tunable variance.  L = 2 + 0.5 * 9 = 6.5.
    """

    kind = ObjectiveKind.NONCONVEX

    def __init__(self, tilts: np.ndarray):
        tilts = np.asarray(tilts, dtype=np.float64)
        super().__init__(A=tilts, b=np.zeros(tilts.shape[0]), lam=0.0)
        if not np.allclose(tilts.sum(axis=0), 0.0, atol=1e-9 * max(1.0, np.abs(tilts).max())):
            raise ValueError("tilt vectors must sum to zero across samples")
        self.L = 6.5
        self.L_component = 6.5
        self.ell = 0.0

    def value(self, x):
        return float(np.sum(x * x + 0.5 * np.cos(3.0 * x)))

    def full_gradient(self, x):
        return 2.0 * x - 1.5 * np.sin(3.0 * x)

    def minibatch_gradient(self, idx, x):
        idx = np.asarray(idx, dtype=np.intp)
        return self.full_gradient(x) + self.A[idx].mean(axis=0)


def make_least_squares(
    n: int = 128,
    m: int = 512,
    seed: int = 0,
    realizable: bool = True,
    noise: float = 0.0,
    lam: float = 0.0,
) -> LeastSquares:
    """Gaussian design with a planted target; realizable means b = A x_true."""
    A = substream(seed, "design").standard_normal((m, n))
    x_true = substream(seed, "target").standard_normal(n)
    b = A @ x_true
    if not realizable or noise > 0:
        b = b + noise * substream(seed, "noise").standard_normal(m)
    return LeastSquares(A, b, lam)


def make_ridge(n: int = 64, m: int = 256, kappa: float = 10.0, seed: int = 0) -> LeastSquares:
    """Ridge least squares whose component condition number is calibrated.

    Picks lam so that (max_j ||a_j||^2 + lam) / (lambda_min(H) + lam) equals
    `kappa`, where H is the unregularized Hessian — i.e. the condition number
    that constrains single-sample step sizes is the requested one.
    """
    if kappa <= 1:
        raise ValueError(f"kappa must exceed 1, got {kappa}")
    A = substream(seed, "design").standard_normal((m, n))
    x_true = substream(seed, "target").standard_normal(n)
    b = A @ x_true + 0.1 * substream(seed, "noise").standard_normal(m)
    row_max = float(np.max(np.sum(A**2, axis=1)))
    h_min = max(float(np.linalg.eigvalsh(A.T @ A / m)[0]), 0.0)
    lam = (row_max - kappa * h_min) / (kappa - 1.0)
    if lam <= 0:
        raise ValueError(
            f"cannot reach kappa={kappa}: problem is already better conditioned"
        )
    return LeastSquares(A, b, lam)


def make_quadratic(n: int = 16, kappa: float = 10.0, seed: int = 0) -> LeastSquares:
    """Realizable quadratic with Hessian spectrum spread linearly over
    [1/kappa, 1] (so L = 1, ell = 1/kappa and f* = 0), for deterministic GD."""
    if kappa < 1:
        raise ValueError(f"kappa must be >= 1, got {kappa}")
    spectrum = np.linspace(1.0 / kappa, 1.0, n)
    basis, _ = np.linalg.qr(substream(seed, "basis").standard_normal((n, n)))
    A = np.sqrt(n * spectrum)[:, None] * basis.T  # A^T A / n has the target spectrum
    x_true = substream(seed, "target").standard_normal(n)
    return LeastSquares(A, A @ x_true, lam=0.0)


def make_logistic(n: int = 32, m: int = 256, seed: int = 0, lam: float = 1e-2) -> LogisticRegression:
    """Gaussian features, labels from a planted separator with logistic flips."""
    A = substream(seed, "design").standard_normal((m, n))
    w = substream(seed, "target").standard_normal(n) / np.sqrt(n)
    margin = A @ w + 0.5 * substream(seed, "noise").standard_normal(m)
    b = np.where(margin >= 0, 1.0, -1.0)
    return LogisticRegression(A, b, lam)


def make_nonconvex(n: int = 16, m: int = 64, seed: int = 0, tilt: float = 1.0) -> NonconvexTest:
    """Non-convex test objective with zero-sum per-sample tilt noise."""
    if tilt == 0.0:
        return NonconvexTest(np.zeros((m, n)))
    raw = substream(seed, "tilts").standard_normal((m, n))
    return NonconvexTest(tilt * (raw - raw.mean(axis=0)))
