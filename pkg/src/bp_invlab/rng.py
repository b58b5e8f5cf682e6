"""Deterministic random-number handles keyed by (seed, stream)."""

from __future__ import annotations

from dataclasses import dataclass

import numpy as np


@dataclass(frozen=True)
class SeededRng:
    """A reproducible RNG source: identical (seed, stream) gives identical draws."""

    seed: int
    stream: int = 0

    def generator(self) -> np.random.Generator:
        return np.random.default_rng([self.seed, self.stream])

    def with_stream(self, stream: int) -> "SeededRng":
        return SeededRng(self.seed, stream)
