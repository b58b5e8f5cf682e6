"""Dense full-row-rank linear operators with cached SVD factorizations.

Every operator here is an m x n real matrix with m <= n and full row rank,
so the pseudoinverse A+ = A'(AA')^-1 and the orthogonal projectors onto the
row space (P = A+A) and the null space (Q = I - P) are well defined.  All
of them are applied as matrix-vector chains through the cached SVD; the
n x n projectors are never materialized.
"""

from __future__ import annotations

from dataclasses import dataclass

import numpy as np

from .errors import DimensionMismatchError, NonFiniteError, RankDeficientError

DEFAULT_RANK_TOL = 1e-10

APPLY_MODES = ("forward", "adjoint", "pinv", "row_project", "null_project")


@dataclass(frozen=True)
class SpectralSummary:
    """Extreme eigenvalues of AA' (squared extreme singular values of A)."""

    sigma_max: float
    sigma_min: float
    condition_ratio: float


class DenseOperator:
    """An m x n matrix with full row rank and a cached thin SVD.

    The instance is immutable after construction and safe to share across
    concurrent workers; all apply methods are read-only.
    """

    def __init__(self, matrix, rank_tol: float = DEFAULT_RANK_TOL):
        a = np.array(matrix, dtype=float, copy=True)
        if a.ndim != 2:
            raise DimensionMismatchError(f"expected a 2-D matrix, got shape {a.shape}")
        m, n = a.shape
        if m > n:
            raise DimensionMismatchError(f"operator needs m <= n, got {m} x {n}")
        if not np.all(np.isfinite(a)):
            raise NonFiniteError("operator entries must be finite")
        u, s, vt = np.linalg.svd(a, full_matrices=False)
        if s[-1] <= rank_tol * s[0]:
            raise RankDeficientError(
                f"smallest singular value {s[-1]:.3e} <= {rank_tol:.1e} x largest "
                f"{s[0]:.3e}: not full row rank"
            )
        a.setflags(write=False)
        self.matrix = a
        self.m = m
        self.n = n
        self.rank_tol = rank_tol
        self._u = u
        self._s = s
        self._vt = vt

    @property
    def singular_values(self) -> np.ndarray:
        """Singular values of A in decreasing order (length m, all > 0)."""
        return self._s.copy()

    def _check(self, v, length: int) -> np.ndarray:
        v = np.asarray(v, dtype=float)
        if v.shape != (length,):
            raise DimensionMismatchError(f"expected a vector of length {length}, got shape {v.shape}")
        return v

    def forward(self, v) -> np.ndarray:
        """A v."""
        return self.matrix @ self._check(v, self.n)

    def adjoint(self, v) -> np.ndarray:
        """A' v."""
        return self.matrix.T @ self._check(v, self.m)

    def pinv(self, v) -> np.ndarray:
        """A+ v = A'(AA')^-1 v, computed through the SVD."""
        v = self._check(v, self.m)
        return self._vt.T @ (self._u.T @ v / self._s)

    def row_project(self, v) -> np.ndarray:
        """P v, orthogonal projection onto the row space of A."""
        v = self._check(v, self.n)
        return self._vt.T @ (self._vt @ v)

    def null_project(self, v) -> np.ndarray:
        """Q v = v - P v, orthogonal projection onto the null space of A."""
        v = self._check(v, self.n)
        return v - self._vt.T @ (self._vt @ v)

    def gram_inverse_apply(self, w) -> np.ndarray:
        """(AA')^-1 w for an m-vector or a stack of them (shape (m, ...))."""
        w = np.asarray(w, dtype=float)
        if w.shape[0] != self.m:
            raise DimensionMismatchError(f"leading dimension must be {self.m}, got {w.shape}")
        scale = self._s**2 if w.ndim == 1 else (self._s**2)[:, None]
        return self._u @ (self._u.T @ w / scale)

    def gram_inv_sqrt_apply(self, w) -> np.ndarray:
        """(AA')^-1/2 w for an m-vector or a stack of them (shape (m, ...))."""
        w = np.asarray(w, dtype=float)
        if w.shape[0] != self.m:
            raise DimensionMismatchError(f"leading dimension must be {self.m}, got {w.shape}")
        scale = self._s if w.ndim == 1 else self._s[:, None]
        return self._u @ (self._u.T @ w / scale)

    def spectral_summary(self) -> SpectralSummary:
        sigma_max = float(self._s[0] ** 2)
        sigma_min = float(self._s[-1] ** 2)
        return SpectralSummary(sigma_max, sigma_min, sigma_min / sigma_max)


def build_operator(matrix, rank_tol: float = DEFAULT_RANK_TOL) -> DenseOperator:
    """Construct a DenseOperator, verifying finiteness and full row rank."""
    return DenseOperator(matrix, rank_tol)


def apply(op: DenseOperator, mode: str, v) -> np.ndarray:
    """Apply one of forward / adjoint / pinv / row_project / null_project."""
    if mode not in APPLY_MODES:
        raise ValueError(f"unknown mode {mode!r}, expected one of {APPLY_MODES}")
    return getattr(op, mode)(v)


def spectral_summary(op: DenseOperator) -> SpectralSummary:
    return op.spectral_summary()
