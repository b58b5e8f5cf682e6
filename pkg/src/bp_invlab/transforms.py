"""Measurement-operator constructors: Gaussian sensing, Haar basis, blur+decimate.

All randomized constructors are pure functions of (dims, seed, stream), so
rebuilding with the same SeededRng is bit-identical.
"""

from __future__ import annotations

import math
from dataclasses import dataclass

import numpy as np

from .errors import (
    BadGeometryError,
    BadLengthError,
    DimensionMismatchError,
    RankDeficientError,
    ZeroColumnError,
)
from .linops import DEFAULT_RANK_TOL, DenseOperator, build_operator
from .rng import SeededRng

_SQRT2 = math.sqrt(2.0)


def gaussian_sensing(m: int, n: int, rng: SeededRng, rank_tol: float = DEFAULT_RANK_TOL) -> DenseOperator:
    """m x n matrix with i.i.d. N(0, 1/m) entries, retried on rank failure.

    A rank-deficient draw has probability zero; if it happens anyway the
    next stream is tried, up to 3 retries.
    """
    if m > n:
        raise DimensionMismatchError(f"need m <= n, got {m} x {n}")
    last_error = None
    for attempt in range(4):
        entries = rng.with_stream(rng.stream + attempt).generator().normal(
            0.0, 1.0 / math.sqrt(m), size=(m, n)
        )
        try:
            return build_operator(entries, rank_tol)
        except RankDeficientError as err:  # pragma: no cover - probability zero
            last_error = err
    raise last_error  # pragma: no cover


@dataclass(frozen=True)
class HaarBasis:
    """Orthonormal multi-level 2-D Haar transform on side x side images.

    levels=None means full depth log2(side); levels=0 is the identity.
    """

    side: int
    levels: int | None = None

    def __post_init__(self):
        if self.side < 1 or self.side & (self.side - 1):
            raise BadGeometryError(f"side must be a power of two, got {self.side}")
        full = self.side.bit_length() - 1
        levels = full if self.levels is None else self.levels
        if not 0 <= levels <= full:
            raise BadGeometryError(f"levels must lie in [0, {full}] for side {self.side}, got {levels}")
        object.__setattr__(self, "levels", levels)


def _analysis_level(block: np.ndarray) -> np.ndarray:
    for axis in (-1, -2):
        even = np.take(block, range(0, block.shape[axis], 2), axis=axis)
        odd = np.take(block, range(1, block.shape[axis], 2), axis=axis)
        block = np.concatenate([(even + odd) / _SQRT2, (even - odd) / _SQRT2], axis=axis)
    return block


def _synthesis_level(block: np.ndarray) -> np.ndarray:
    for axis in (-2, -1):
        half = block.shape[axis] // 2
        approx = np.take(block, range(half), axis=axis)
        detail = np.take(block, range(half, 2 * half), axis=axis)
        out = np.empty_like(block)
        even_idx = [slice(None)] * block.ndim
        odd_idx = [slice(None)] * block.ndim
        even_idx[axis] = slice(0, None, 2)
        odd_idx[axis] = slice(1, None, 2)
        out[tuple(even_idx)] = (approx + detail) / _SQRT2
        out[tuple(odd_idx)] = (approx - detail) / _SQRT2
        block = out
    return block


def _haar2(images: np.ndarray, levels: int, forward: bool) -> np.ndarray:
    """Transform a (..., side, side) stack in the standard Mallat layout."""
    out = images.astype(float, copy=True)
    side = out.shape[-1]
    if forward:
        size = side
        for _ in range(levels):
            out[..., :size, :size] = _analysis_level(out[..., :size, :size])
            size //= 2
    else:
        size = side >> (levels - 1) if levels else side
        for _ in range(levels):
            out[..., :size, :size] = _synthesis_level(out[..., :size, :size])
            size *= 2
    return out


def haar_transform(basis: HaarBasis, direction: str, x) -> np.ndarray:
    """Apply the orthonormal analysis ('forward') or synthesis ('inverse') map."""
    if direction not in ("forward", "inverse"):
        raise ValueError(f"direction must be 'forward' or 'inverse', got {direction!r}")
    x = np.asarray(x, dtype=float)
    n = basis.side * basis.side
    if x.shape != (n,):
        raise BadLengthError(f"expected length {n} (side {basis.side}), got shape {x.shape}")
    image = x.reshape(basis.side, basis.side)
    return _haar2(image, basis.levels, direction == "forward").reshape(n)


def compose_with_basis(sensing: DenseOperator, basis: HaarBasis) -> DenseOperator:
    """Operator mapping Haar coefficients to measurements: sensing o synthesis.

    Row j of the result is the analysis transform of row j of the sensing
    matrix, so the composed matrix is M H' without an n x n materialization.
    """
    n = basis.side * basis.side
    if sensing.n != n:
        raise DimensionMismatchError(f"sensing has {sensing.n} columns, basis needs {n}")
    rows = sensing.matrix.reshape(sensing.m, basis.side, basis.side)
    composed = _haar2(rows, basis.levels, forward=True).reshape(sensing.m, n)
    return build_operator(composed, sensing.rank_tol)


def _gaussian_kernel(size: int, sigma: float) -> np.ndarray:
    if size == 1:
        return np.ones((1, 1))
    offsets = np.arange(size) - (size - 1) / 2.0
    g = np.exp(-(offsets**2) / (2.0 * sigma**2))
    kernel = np.outer(g, g)
    return kernel / kernel.sum()


def _reflect(i: int, size: int) -> int:
    # half-sample symmetric reflection, as in np.pad(mode="symmetric")
    while i < 0 or i >= size:
        if i < 0:
            i = -i - 1
        if i >= size:
            i = 2 * size - 1 - i
    return i


def sr_operator(side: int, scale: int, kernel_size: int, kernel_sigma: float) -> DenseOperator:
    """Blur-then-decimate operator: 2-D Gaussian filter, reflective boundary,
    then subsampling by `scale` in each dimension; m = (side/scale)^2 rows."""
    if side < 1 or scale < 1 or side % scale:
        raise BadGeometryError(f"side {side} must be a positive multiple of scale {scale}")
    if kernel_size < 1 or kernel_size > 2 * side:
        raise BadGeometryError(f"kernel_size {kernel_size} out of range for side {side}")
    if kernel_size > 1 and kernel_sigma <= 0:
        raise BadGeometryError("kernel_sigma must be positive for kernel_size > 1")
    kernel = _gaussian_kernel(kernel_size, kernel_sigma)
    low = -((kernel_size - 1) // 2)
    out_side = side // scale
    matrix = np.zeros((out_side * out_side, side * side))
    for oi in range(out_side):
        for oj in range(out_side):
            row = matrix[oi * out_side + oj]
            for di in range(kernel_size):
                ti = _reflect(scale * oi + low + di, side)
                for dj in range(kernel_size):
                    tj = _reflect(scale * oj + low + dj, side)
                    row[ti * side + tj] += kernel[di, dj]
    return build_operator(matrix)


def column_normalize(op: DenseOperator, rank_tol: float | None = None) -> DenseOperator:
    """Rescale every column to unit l2 norm; full row rank is re-verified."""
    norms = np.linalg.norm(op.matrix, axis=0)
    if np.any(norms == 0.0):
        raise ZeroColumnError("operator has a zero column")
    return build_operator(op.matrix / norms, op.rank_tol if rank_tol is None else rank_tol)
