"""Iterative solvers: PGD, proximal gradient, FISTA, and untrained ALISTA.

Every solver emits an IterateTrace recording objective value, l1 norm, and
distance/PSNR against registered reference vectors.  A run owns its state
and is single-threaded; runs over shared operators may execute concurrently.
"""

from __future__ import annotations

import math
import time
from dataclasses import dataclass

import numpy as np

from .errors import DimensionMismatchError, NonFiniteIterateError
from .fidelity import FidelityTerm
from .linops import DenseOperator
from .metrics import psnr
from .priors import soft_threshold

DIVERGENCE_LIMIT = 1e12

X0_POLICIES = ("zeros", "pinv_of_y")


@dataclass
class SolverConfig:
    """Iteration budget and bookkeeping knobs shared by all solvers.

    stop_tol=0 (the default) runs the full budget; a positive value stops
    once the relative step ||x_{t+1}-x_t|| / max(1, ||x_t||) falls below it.
    x0 is "zeros", "pinv_of_y", or an explicit vector.
    """

    max_iters: int
    step_size: float | None = None
    stop_tol: float = 0.0
    record_every: int = 1
    x0: object = "zeros"
    record_initial: bool = True
    psnr_peak: float = 255.0

    def __post_init__(self):
        if self.max_iters < 1:
            raise ValueError(f"max_iters must be >= 1, got {self.max_iters}")
        if self.step_size is not None and self.step_size <= 0:
            raise ValueError(f"step_size must be positive, got {self.step_size}")
        if self.record_every < 1:
            raise ValueError(f"record_every must be >= 1, got {self.record_every}")


class IterateTrace:
    """Per-iteration log with strictly increasing indices."""

    def __init__(self, references: dict | None = None, peak: float = 255.0):
        self.references = {name: np.asarray(v, dtype=float) for name, v in (references or {}).items()}
        self.peak = peak
        self.iterations: list[int] = []
        self.objective: list[float] = []
        self.l1_norm: list[float] = []
        self.wall_clock: list[float] = []
        self.distances: dict[str, list[float]] = {name: [] for name in self.references}
        self.psnrs: dict[str, list[float]] = {name: [] for name in self.references}
        self._start = time.perf_counter()

    def record(self, t: int, x: np.ndarray, objective: float) -> None:
        if self.iterations and t <= self.iterations[-1]:
            raise ValueError(f"iteration {t} not after {self.iterations[-1]}")
        self.iterations.append(t)
        self.objective.append(float(objective))
        self.l1_norm.append(float(np.sum(np.abs(x))))
        self.wall_clock.append(time.perf_counter() - self._start)
        for name, ref in self.references.items():
            self.distances[name].append(float(np.linalg.norm(x - ref)))
            self.psnrs[name].append(psnr(x, ref, self.peak))

    def distance(self, name: str) -> np.ndarray:
        return np.asarray(self.distances[name])

    def psnr_series(self, name: str) -> np.ndarray:
        return np.asarray(self.psnrs[name])

    @classmethod
    def from_columns(cls, iterations, distances: dict) -> "IterateTrace":
        """Build a bare trace from given columns (testing and rate fitting)."""
        trace = cls()
        trace.iterations = [int(t) for t in iterations]
        trace.distances = {name: [float(d) for d in col] for name, col in distances.items()}
        return trace


def _initial_x(op: DenseOperator, y: np.ndarray, cfg: SolverConfig) -> np.ndarray:
    if isinstance(cfg.x0, str):
        if cfg.x0 == "zeros":
            return np.zeros(op.n)
        if cfg.x0 == "pinv_of_y":
            return op.pinv(y)
        raise ValueError(f"x0 policy must be one of {X0_POLICIES} or a vector, got {cfg.x0!r}")
    x0 = np.asarray(cfg.x0, dtype=float)
    if x0.shape != (op.n,):
        raise DimensionMismatchError(f"x0 must have length {op.n}, got shape {x0.shape}")
    return x0.copy()


def _guard(x: np.ndarray, t: int) -> None:
    if not np.all(np.isfinite(x)) or np.linalg.norm(x) > DIVERGENCE_LIMIT:
        raise NonFiniteIterateError(f"iterate diverged at iteration {t}")


def _run(op, y, cfg, step, objective, references):
    """Shared solver loop; `step` maps (x, t) to the next iterate."""
    x = _initial_x(op, y, cfg)
    trace = IterateTrace(references, cfg.psnr_peak)
    if cfg.record_initial:
        trace.record(0, x, objective(x))
    for t in range(1, cfg.max_iters + 1):
        x_next = step(x, t)
        _guard(x_next, t)
        moved = np.linalg.norm(x_next - x) / max(1.0, np.linalg.norm(x))
        x = x_next
        stopping = cfg.stop_tol > 0 and moved < cfg.stop_tol
        if t % cfg.record_every == 0 or t == cfg.max_iters or stopping:
            trace.record(t, x, objective(x))
        if stopping:
            break
    return x, trace


def pgd(f: FidelityTerm, projector, cfg: SolverConfig, references: dict | None = None):
    """Projected gradient descent: x <- Proj(x - mu * grad l(x))."""
    mu = f.step_size() if cfg.step_size is None else cfg.step_size

    def step(x, t):
        return projector.project(x - mu * f.gradient(x))

    return _run(f.operator, f.y, cfg, step, f.value, references)


def proximal_gradient(f: FidelityTerm, prior, beta: float, cfg: SolverConfig,
                      references: dict | None = None):
    """Proximal gradient on l(x) + beta * s(x): the prox weight is mu * beta."""
    if beta < 0:
        raise ValueError(f"beta must be nonnegative, got {beta}")
    mu = f.step_size() if cfg.step_size is None else cfg.step_size
    weight = mu * beta

    def objective(x):
        return f.value(x) + beta * prior.penalty(x)

    def step(x, t):
        return prior.prox(x - mu * f.gradient(x), weight)

    return _run(f.operator, f.y, cfg, step, objective, references)


def fista(f: FidelityTerm, prior, beta: float, cfg: SolverConfig,
          references: dict | None = None):
    """Accelerated proximal gradient with the standard momentum recurrence
    t_1 = 1, t_{k+1} = (1 + sqrt(1 + 4 t_k^2)) / 2; no restarts."""
    if beta < 0:
        raise ValueError(f"beta must be nonnegative, got {beta}")
    mu = f.step_size() if cfg.step_size is None else cfg.step_size
    weight = mu * beta

    def objective(x):
        return f.value(x) + beta * prior.penalty(x)

    state = {"z": None, "momentum": 1.0}

    def step(x, t):
        z = x if state["z"] is None else state["z"]
        x_next = prior.prox(z - mu * f.gradient(z), weight)
        momentum_next = (1.0 + math.sqrt(1.0 + 4.0 * state["momentum"] ** 2)) / 2.0
        state["z"] = x_next + ((state["momentum"] - 1.0) / momentum_next) * (x_next - x)
        state["momentum"] = momentum_next
        return x_next

    return _run(f.operator, f.y, cfg, step, objective, references)


@dataclass(frozen=True)
class AlistaWeights:
    """Analytic ALISTA weights: matrix = (A+)' Lambda, scale = diag(Lambda)."""

    matrix: np.ndarray
    scale: np.ndarray


def alista_weights(op: DenseOperator) -> AlistaWeights:
    """Closed-form minimizer of ||W'A||_F^2 subject to W[:,i]'A[:,i] = 1.

    Columns decouple, giving W = (AA')^-1 A Lambda with
    lambda_i = 1 / (a_i'(AA')^-1 a_i).
    """
    from .errors import ZeroColumnError

    gram_inv_a = op.gram_inverse_apply(op.matrix)
    diag = np.einsum("ij,ij->j", op.matrix, gram_inv_a)
    if np.any(diag <= 0.0):
        raise ZeroColumnError("every column must have a_i'(AA')^-1 a_i > 0")
    scale = 1.0 / diag
    return AlistaWeights(matrix=gram_inv_a * scale[None, :], scale=scale)


def alista_run(op: DenseOperator, y, theta, cfg: SolverConfig, mu: float = 1.0,
               weights: AlistaWeights | None = None, references: dict | None = None):
    """Untrained ALISTA: x <- T_{theta_t}(x - mu * Lambda A+ (A x - y)).

    theta is a constant, a sequence indexed by iteration, or a callable t ->
    threshold; the untrained setting is mu = 1 with a constant theta.  The
    recorded objective uses the first threshold as the l1 penalty weight.
    """
    if weights is None:
        weights = alista_weights(op)
    f_bp = FidelityTerm("bp", op, y)

    if callable(theta):
        theta_at = theta
    elif np.ndim(theta) == 0:
        theta_at = lambda t: float(theta)
    else:
        schedule = [float(v) for v in theta]
        if len(schedule) < cfg.max_iters:
            raise ValueError(f"theta schedule has {len(schedule)} entries for {cfg.max_iters} iterations")
        theta_at = lambda t: schedule[t - 1]

    def objective(x):
        return f_bp.value(x) + theta_at(1) * float(np.sum(np.abs(x)))

    def step(x, t):
        back = op.pinv(op.forward(x) - f_bp.y)
        return soft_threshold(x - mu * (weights.scale * back), theta_at(t))

    return _run(op, f_bp.y, cfg, step, objective, references)
