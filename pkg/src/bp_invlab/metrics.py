"""PSNR, SNR-calibrated noise injection, and top-k sparsification."""

from __future__ import annotations

import math
from dataclasses import dataclass

import numpy as np

from .errors import BadKError, DimensionMismatchError, ZeroSignalError
from .rng import SeededRng


@dataclass(frozen=True)
class NoiseSpec:
    """White Gaussian noise rescaled to hit snr_db exactly; inf means noiseless."""

    snr_db: float
    rng: SeededRng


def psnr(x_hat, x_ref, peak: float = 255.0) -> float:
    """10 log10(peak^2 / mean squared error); +inf on an exact match."""
    x_hat = np.asarray(x_hat, dtype=float)
    x_ref = np.asarray(x_ref, dtype=float)
    if x_hat.shape != x_ref.shape:
        raise DimensionMismatchError(f"shape mismatch: {x_hat.shape} vs {x_ref.shape}")
    if peak <= 0:
        raise ValueError("peak must be positive")
    mse = float(np.mean((x_hat - x_ref) ** 2))
    if mse == 0.0:
        return math.inf
    return 10.0 * math.log10(peak**2 / mse)


def add_noise_for_snr(clean, spec: NoiseSpec) -> np.ndarray:
    """Add white Gaussian noise rescaled so the measured SNR equals snr_db."""
    clean = np.asarray(clean, dtype=float)
    if math.isinf(spec.snr_db):
        return clean.copy()
    signal_energy = float(np.dot(clean, clean))
    if signal_energy == 0.0:
        raise ZeroSignalError("cannot set a finite SNR against a zero signal")
    noise = spec.rng.generator().standard_normal(clean.shape[0])
    target_energy = signal_energy / 10.0 ** (spec.snr_db / 10.0)
    noise *= math.sqrt(target_energy / float(np.dot(noise, noise)))
    return clean + noise


def sparsify_top_k(coeffs, k: int) -> np.ndarray:
    """Keep the k largest-magnitude entries (ties: lowest index), zero the rest."""
    coeffs = np.asarray(coeffs, dtype=float)
    n = coeffs.shape[0]
    if not 1 <= k <= n:
        raise BadKError(f"k must be in [1, {n}], got {k}")
    order = np.argsort(-np.abs(coeffs), kind="stable")
    out = np.zeros_like(coeffs)
    keep = order[:k]
    out[keep] = coeffs[keep]
    return out
