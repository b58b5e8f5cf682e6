"""Least-squares and back-projection data-fidelity terms.

Both terms share the unified gradient form W(Ax - y), with W = A' for
least squares and W = A+ for back projection.  The back-projection value
is computed through the pseudoinverse; the equivalent inverse-square-root
form exists only as a test oracle.
"""

from __future__ import annotations

import numpy as np

from .errors import DimensionMismatchError
from .linops import DenseOperator

KINDS = ("ls", "bp")


class FidelityTerm:
    """Immutable (kind, operator, observation) triple with value/gradient logic."""

    def __init__(self, kind: str, operator: DenseOperator, y):
        kind = kind.lower()
        if kind not in KINDS:
            raise ValueError(f"kind must be one of {KINDS}, got {kind!r}")
        y = np.array(y, dtype=float, copy=True)
        if y.shape != (operator.m,):
            raise DimensionMismatchError(f"observation must have length {operator.m}, got shape {y.shape}")
        y.setflags(write=False)
        self.kind = kind
        self.operator = operator
        self.y = y

    def value(self, x) -> float:
        residual = self.y - self.operator.forward(x)
        if self.kind == "ls":
            return 0.5 * float(residual @ residual)
        back = self.operator.pinv(residual)
        return 0.5 * float(back @ back)

    def gradient(self, x) -> np.ndarray:
        residual = self.operator.forward(x) - self.y
        if self.kind == "ls":
            return self.operator.adjoint(residual)
        return self.operator.pinv(residual)

    def step_size(self) -> float:
        """1 over the Lipschitz constant of the gradient: 1/sigma_max(AA') for
        least squares, exactly 1 for back projection (A+A is a projection)."""
        if self.kind == "bp":
            return 1.0
        return 1.0 / self.operator.spectral_summary().sigma_max


def fidelity_value(f: FidelityTerm, x) -> float:
    return f.value(x)


def fidelity_gradient(f: FidelityTerm, x) -> np.ndarray:
    return f.gradient(x)


def default_step_size(f: FidelityTerm) -> float:
    return f.step_size()
