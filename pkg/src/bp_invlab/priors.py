"""Projection and proximal operators: l1 ball, soft threshold, oracle, Tikhonov."""

from __future__ import annotations

import numpy as np

from .errors import (
    DimensionMismatchError,
    NegativeThresholdError,
    NonpositiveRadiusError,
    SingularSystemError,
    WrongVariantError,
)
from .linops import DenseOperator


def project_l1_ball(v, radius: float) -> np.ndarray:
    """Euclidean projection onto {x : ||x||_1 <= radius}.

    Sort-and-threshold: the unique simplex threshold theta* is found from the
    sorted magnitudes, then sign(v) * max(|v| - theta*, 0) is returned.
    Already-feasible inputs (including the exact boundary) come back unchanged.
    """
    if radius <= 0:
        raise NonpositiveRadiusError(f"radius must be positive, got {radius}")
    v = np.asarray(v, dtype=float)
    magnitude = np.abs(v)
    if magnitude.sum() <= radius:
        return v.copy()
    dropped = np.sort(magnitude)[::-1]
    cumulative = np.cumsum(dropped)
    counts = np.arange(1, v.size + 1)
    candidates = (cumulative - radius) / counts
    rho = np.nonzero(dropped > candidates)[0][-1]
    theta = candidates[rho]
    return np.sign(v) * np.maximum(magnitude - theta, 0.0)


def soft_threshold(z, theta: float) -> np.ndarray:
    """sign(z_i) * max(|z_i| - theta, 0); the prox of theta * ||.||_1."""
    if theta < 0:
        raise NegativeThresholdError(f"threshold must be nonnegative, got {theta}")
    z = np.asarray(z, dtype=float)
    return np.sign(z) * np.maximum(np.abs(z) - theta, 0.0)


def oracle_project(x, x_gt, op: DenseOperator) -> np.ndarray:
    """P x + Q x_gt: keep the row-space content of x, pin the null space to x_gt."""
    x = np.asarray(x, dtype=float)
    x_gt = np.asarray(x_gt, dtype=float)
    if x.shape != (op.n,) or x_gt.shape != (op.n,):
        raise DimensionMismatchError(f"both vectors must have length {op.n}")
    return op.row_project(x) + op.null_project(x_gt)


class L1Ball:
    """Projection prior onto the l1 ball of a fixed radius."""

    def __init__(self, radius: float):
        if radius <= 0:
            raise NonpositiveRadiusError(f"radius must be positive, got {radius}")
        self.radius = float(radius)

    def project(self, z) -> np.ndarray:
        return project_l1_ball(z, self.radius)

    map = project


class OraclePrior:
    """Projection prior fixing the null-space component to that of x_gt."""

    def __init__(self, x_gt, op: DenseOperator):
        x_gt = np.asarray(x_gt, dtype=float)
        if x_gt.shape != (op.n,):
            raise DimensionMismatchError(f"x_gt must have length {op.n}")
        self.op = op
        self.x_gt = x_gt.copy()
        self._null_part = op.null_project(x_gt)

    def project(self, z) -> np.ndarray:
        return self.op.row_project(np.asarray(z, dtype=float)) + self._null_part

    map = project


class SoftThresholdProx:
    """Prox prior for s(x) = ||x||_1; theta is the standalone-map threshold."""

    def __init__(self, theta: float = 0.0):
        if theta < 0:
            raise NegativeThresholdError(f"theta must be nonnegative, got {theta}")
        self.theta = float(theta)

    def prox(self, z, weight: float) -> np.ndarray:
        """prox of weight * ||.||_1."""
        return soft_threshold(z, weight)

    def penalty(self, x) -> float:
        return float(np.sum(np.abs(x)))

    def map(self, z) -> np.ndarray:
        return soft_threshold(z, self.theta)


class TikhonovProx:
    """Prox prior for s(x) = 0.5 ||D x||^2 with D'D positive definite.

    The symmetric eigendecomposition of D'D is cached once, so the prox is a
    direct solve of (I + weight * D'D) x = z for any weight.
    """

    def __init__(self, beta: float, D):
        if beta <= 0:
            raise ValueError(f"beta must be positive, got {beta}")
        D = np.asarray(D, dtype=float)
        if D.ndim != 2:
            raise DimensionMismatchError(f"D must be a matrix, got shape {D.shape}")
        gram = D.T @ D
        eigvals, eigvecs = np.linalg.eigh(gram)
        if eigvals[0] <= 1e-12 * max(eigvals[-1], 1.0):
            raise SingularSystemError("D'D is not positive definite")
        self.beta = float(beta)
        self.D = D
        self._eigvals = eigvals
        self._eigvecs = eigvecs

    def prox(self, z, weight: float) -> np.ndarray:
        """Solve (I + weight * D'D) x = z through the cached eigenbasis."""
        if weight < 0:
            raise ValueError(f"weight must be nonnegative, got {weight}")
        z = np.asarray(z, dtype=float)
        if z.shape != (self.D.shape[1],):
            raise DimensionMismatchError(f"expected length {self.D.shape[1]}, got shape {z.shape}")
        return self._eigvecs @ (self._eigvecs.T @ z / (1.0 + weight * self._eigvals))

    def penalty(self, x) -> float:
        dx = self.D @ np.asarray(x, dtype=float)
        return 0.5 * float(dx @ dx)

    def map(self, z) -> np.ndarray:
        return self.prox(z, self.beta)

    def lipschitz_constant(self, weight: float | None = None) -> float:
        """Global Lipschitz constant of the prox: 1 / (1 + weight * sigma_min(D'D))."""
        weight = self.beta if weight is None else weight
        return 1.0 / (1.0 + weight * float(self._eigvals[0]))


def tikhonov_prox(z, beta: float, D) -> np.ndarray:
    """Solve (I + beta * D'D) x = z; the prox of beta * 0.5||Dx||^2 at z."""
    return TikhonovProx(beta, D).prox(z, beta)


def contraction_delta(prior, op: DenseOperator | None = None) -> float:
    """Null-space contraction level delta = 1 - k for a Tikhonov prior, where
    k = 1/(1 + beta * sigma_min(D'D)) is the global Lipschitz constant of its
    prox.  Valid for any full-row-rank operator, which is only dimension-checked."""
    if not isinstance(prior, TikhonovProx):
        raise WrongVariantError(f"contraction_delta needs a Tikhonov prior, got {type(prior).__name__}")
    if op is not None and prior.D.shape[1] != op.n:
        raise DimensionMismatchError(f"D has {prior.D.shape[1]} columns, operator needs {op.n}")
    return 1.0 - prior.lipschitz_constant()
