"""Empirical convergence-rate machinery.

Monte Carlo estimates of the restricted contraction bounds for the two
fidelity kinds (sampled over k-sparse supports), sampled lower bounds of the
cone-restricted contraction factor rho, the oracle-prior warm-up rates, the
null-space-contraction convergence bound, and log-linear rate fitting from
solver traces.
"""

from __future__ import annotations

import math
from dataclasses import dataclass

import numpy as np

from .errors import BadDeltaError, BadSupportSizeError, InsufficientDataError
from .fidelity import FidelityTerm
from .linops import DenseOperator
from .rng import SeededRng
from .solvers import IterateTrace

DEFAULT_NUM_SUPPORTS = 500

KAPPA_CONVEX = 1.0
KAPPA_NONCONVEX = 2.0


@dataclass(frozen=True)
class RateEstimate:
    """Sampled restricted-rate bounds; ls/bp terms share the same support set.

    ls_terms[i] is sigma_min(As' As) for the i-th support submatrix As, and
    bp_terms[i] is sigma_min(As' (AA')^-1 As).  ratio is 1.0 when both
    estimates vanish (orthonormal rows).
    """

    p_ls_hat: float
    p_bp_hat: float
    ratio: float
    k: int
    num_supports: int
    seed: int
    stream: int
    ls_terms: np.ndarray
    bp_terms: np.ndarray
    supports: np.ndarray


@dataclass(frozen=True)
class EmpiricalRate:
    """Least-squares fit of log distance vs iteration over a window."""

    slope: float
    window: tuple
    r2: float


def sample_supports(n: int, k: int, num: int, rng: SeededRng) -> np.ndarray:
    """num uniform k-subsets of range(n), without replacement, sorted rows."""
    gen = rng.generator()
    return np.sort(
        np.stack([gen.choice(n, size=k, replace=False) for _ in range(num)]), axis=1
    )


def _check_support_size(op: DenseOperator, k: int) -> None:
    if not 1 <= k <= op.m:
        raise BadSupportSizeError(f"k must be in [1, {op.m}], got {k}")


def estimate_restricted_rates(op: DenseOperator, k: int, num_supports: int = DEFAULT_NUM_SUPPORTS,
                              rng: SeededRng = SeededRng(0), supports: np.ndarray | None = None) -> RateEstimate:
    """Sample supports and keep the worst restricted smallest eigenvalue.

    For each support the m x k submatrix As yields sigma_min(As' As) for the
    least-squares bound and sigma_min(As' (AA')^-1 As) for the back-projection
    bound; both estimators consume the identical support list.
    """
    _check_support_size(op, k)
    if supports is None:
        if num_supports < 1:
            raise BadSupportSizeError(f"num_supports must be >= 1, got {num_supports}")
        supports = sample_supports(op.n, k, num_supports, rng)
    else:
        supports = np.asarray(supports)
        num_supports = supports.shape[0]
    ls_terms = np.empty(num_supports)
    bp_terms = np.empty(num_supports)
    for i, support in enumerate(supports):
        sub = op.matrix[:, support]
        ls_terms[i] = np.linalg.svd(sub, compute_uv=False)[-1] ** 2
        bp_terms[i] = np.linalg.svd(op.gram_inv_sqrt_apply(sub), compute_uv=False)[-1] ** 2
    sigma_max = op.spectral_summary().sigma_max
    p_ls = float(np.clip(1.0 - ls_terms.min() / sigma_max, 0.0, 1.0))
    p_bp = float(np.clip(1.0 - bp_terms.min(), 0.0, 1.0))
    ratio = p_bp / p_ls if p_ls > 0 else 1.0
    return RateEstimate(p_ls, p_bp, ratio, k, num_supports, rng.seed, rng.stream,
                        ls_terms, bp_terms, supports)


def rho_pair_value(op: DenseOperator, kind: str, u, v) -> float:
    """u'(I - mu W A)v at the default step size of the given fidelity kind."""
    u = np.asarray(u, dtype=float)
    v = np.asarray(v, dtype=float)
    if kind == "ls":
        mu = 1.0 / op.spectral_summary().sigma_max
        return float(u @ v - mu * (op.forward(u) @ op.forward(v)))
    if kind == "bp":
        return float(u @ v - op.forward(u) @ op.gram_inverse_apply(op.forward(v)))
    raise ValueError(f"kind must be 'ls' or 'bp', got {kind!r}")


def _unit_on_support(n: int, support: np.ndarray, gen: np.random.Generator) -> np.ndarray:
    vec = np.zeros(n)
    entries = gen.standard_normal(support.size)
    vec[support] = entries / np.linalg.norm(entries)
    return vec


def monte_carlo_rho(op: DenseOperator, kind: str, k: int, num_pairs: int,
                    rng: SeededRng, supports: np.ndarray | None = None,
                    kappa: float = KAPPA_CONVEX) -> float:
    """Sampled max of u'(I - mu W A)v over unit pairs on k-sparse supports.

    This is a lower bound on rho restricted to the k-sparse cone.  Passing
    the support list used by estimate_restricted_rates makes the samples
    matched, so the result is bounded by the corresponding p-hat.  kappa
    rescales the bound for non-convex priors (2 instead of 1).
    """
    _check_support_size(op, k)
    if num_pairs < 1:
        raise BadSupportSizeError(f"num_pairs must be >= 1, got {num_pairs}")
    gen = rng.generator()
    best = -math.inf
    for _ in range(num_pairs):
        if supports is None:
            sup_u = np.sort(gen.choice(op.n, size=k, replace=False))
            sup_v = np.sort(gen.choice(op.n, size=k, replace=False))
        else:
            sup_u = supports[gen.integers(len(supports))]
            sup_v = supports[gen.integers(len(supports))]
        u = _unit_on_support(op.n, sup_u, gen)
        v = _unit_on_support(op.n, sup_v, gen)
        best = max(best, rho_pair_value(op, kind, u, v))
    return kappa * best


def monte_carlo_xi(op: DenseOperator, f: FidelityTerm, x_star, k: int,
                   num_supports: int, rng: SeededRng,
                   supports: np.ndarray | None = None) -> float:
    """Sampled sup of v'W(y - A x*) over unit v on k-sparse supports.

    On a fixed support the supremum is the norm of the restricted residual
    image, so each sample is evaluated exactly.  Not used by the acceptance
    suite; the quantity is slack by construction.
    """
    _check_support_size(op, k)
    if supports is None:
        supports = sample_supports(op.n, k, num_supports, rng)
    w_res = -f.gradient(np.asarray(x_star, dtype=float))
    return float(max(np.linalg.norm(w_res[support]) for support in supports))


def warmup_rates(op: DenseOperator) -> tuple:
    """Oracle-prior rates: (1 - sigma_min/sigma_max, 0.0) for (ls, bp)."""
    return (1.0 - op.spectral_summary().condition_ratio, 0.0)


def theorem2_bound(f: FidelityTerm, delta: float) -> float:
    """Linear-rate bound of the proximal gradient under a null-space
    contraction of level delta: max{1 - sigma_min/sigma_max, 1 - delta} for
    least squares, 1 - delta for back projection."""
    if not 0.0 < delta <= 1.0:
        raise BadDeltaError(f"delta must lie in (0, 1], got {delta}")
    if f.kind == "bp":
        return 1.0 - delta
    summary = f.operator.spectral_summary()
    return max(1.0 - summary.condition_ratio, 1.0 - delta)


def empirical_rate(trace: IterateTrace, reference: str, window: tuple | None = None) -> EmpiricalRate:
    """Fit log distance-to-reference vs iteration with ordinary least squares.

    A zero distance inside the window means the run converged exactly; the
    typed outcome is a slope of -inf with r2 = 1.
    """
    iterations = np.asarray(trace.iterations, dtype=float)
    distances = trace.distance(reference)
    if window is None:
        window = (int(iterations[0]), int(iterations[-1])) if iterations.size else (0, 0)
    lo, hi = window
    mask = (iterations >= lo) & (iterations <= hi)
    iterations = iterations[mask]
    distances = distances[mask]
    if np.any(distances == 0.0):
        return EmpiricalRate(slope=-math.inf, window=(lo, hi), r2=1.0)
    if distances.size < 5:
        raise InsufficientDataError(f"need >= 5 recorded points in window, got {distances.size}")
    logs = np.log(distances)
    slope, intercept = np.polyfit(iterations, logs, 1)
    fit = slope * iterations + intercept
    ss_res = float(np.sum((logs - fit) ** 2))
    ss_tot = float(np.sum((logs - logs.mean()) ** 2))
    r2 = 1.0 if ss_tot == 0.0 else max(0.0, 1.0 - ss_res / ss_tot)
    return EmpiricalRate(slope=float(slope), window=(lo, hi), r2=r2)
