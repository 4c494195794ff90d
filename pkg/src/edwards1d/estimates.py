"""Monte Carlo estimate records and combination helpers."""

from __future__ import annotations

import math
from dataclasses import dataclass

import numpy as np


@dataclass(frozen=True)
class MCEstimate:
    """Sample mean with its standard error, sample count, and seed."""

    mean: float
    stderr: float
    n: int
    seed: int

    @classmethod
    def from_samples(cls, samples: np.ndarray, seed: int) -> "MCEstimate":
        samples = np.asarray(samples, dtype=float)
        n = samples.size
        if n < 2:
            raise ValueError("MCEstimate.from_samples: need at least two samples")
        mean = float(samples.mean())
        se = float(samples.std(ddof=1) / math.sqrt(n))
        return cls(mean, se, n, seed)

    def scaled(self, c: float) -> "MCEstimate":
        return MCEstimate(c * self.mean, abs(c) * self.stderr, self.n, self.seed)

    def plus(self, other: "MCEstimate") -> "MCEstimate":
        """Sum of two independent estimates."""
        return MCEstimate(self.mean + other.mean,
                          math.hypot(self.stderr, other.stderr),
                          min(self.n, other.n), self.seed)


def combined_se(*estimates: MCEstimate) -> float:
    return math.hypot(*(e.stderr for e in estimates))


def within_se(a: MCEstimate, b: MCEstimate, k: float = 3.0,
              extra: float = 0.0) -> bool:
    """|mean_a - mean_b| <= k * combined SE (+ a deterministic slack)."""
    return abs(a.mean - b.mean) <= k * combined_se(a, b) + extra


@dataclass
class StreamingMoments:
    """Numerically stable streaming mean/variance merge across replica chunks.

    Chandrasekhar-style pairwise merge of (n, mean, M2); merging order is the
    fixed chunk order, so results do not depend on the worker count.
    """

    n: int = 0
    mean: float = 0.0
    m2: float = 0.0

    def add_chunk(self, samples: np.ndarray) -> None:
        samples = np.asarray(samples, dtype=float)
        cn = samples.size
        if cn == 0:
            return
        cmean = float(samples.mean())
        cm2 = float(((samples - cmean) ** 2).sum())
        delta = cmean - self.mean
        tot = self.n + cn
        self.mean += delta * cn / tot
        self.m2 += cm2 + delta * delta * self.n * cn / tot
        self.n = tot

    def estimate(self, seed: int) -> MCEstimate:
        if self.n < 2:
            raise ValueError("StreamingMoments: need at least two samples")
        se = math.sqrt(self.m2 / (self.n - 1) / self.n)
        return MCEstimate(self.mean, se, self.n, seed)
