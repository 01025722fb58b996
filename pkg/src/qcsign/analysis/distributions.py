"""Distributions over the acceptance ratio and over the basis split."""

from __future__ import annotations

import enum
import math
from dataclasses import dataclass, field

import numpy as np

from qcsign.analysis.logspace import LOG2, LOG_FACTORIALS


class AlphaKind(enum.Enum):
    UNIFORM = "uniform"
    POINT = "point"
    TABULATED = "tabulated"


@dataclass(frozen=True)
class AlphaDistribution:
    """Publicly known distribution ``p(alpha)`` Trent samples from.

    ``TABULATED`` is a discrete distribution: ``weights[i]`` is the mass at
    ``nodes[i]``.
    """

    kind: AlphaKind
    lo: float = 0.0
    hi: float = 0.0
    nodes: tuple[float, ...] = field(default=())
    weights: tuple[float, ...] = field(default=())

    def __post_init__(self):
        if self.kind is AlphaKind.UNIFORM:
            if not 0.5 < self.lo < self.hi < 1.0:
                raise ValueError(f"uniform support must satisfy 1/2 < lo < hi < 1, got [{self.lo}, {self.hi}]")
        elif self.kind is AlphaKind.POINT:
            if not 0.5 < self.lo < 1.0:
                raise ValueError(f"point mass must lie in (1/2, 1), got {self.lo}")
        else:
            if not self.nodes or len(self.nodes) != len(self.weights):
                raise ValueError("tabulated distribution needs matching, non-empty nodes and weights")
            if any(not 0.5 < a < 1.0 for a in self.nodes):
                raise ValueError("tabulated nodes must lie in (1/2, 1)")
            if any(w < 0 for w in self.weights) or abs(math.fsum(self.weights) - 1.0) > 1e-12:
                raise ValueError("tabulated weights must be non-negative and sum to 1")

    @classmethod
    def uniform(cls, lo: float = 0.9, hi: float = 0.99) -> "AlphaDistribution":
        return cls(AlphaKind.UNIFORM, lo=float(lo), hi=float(hi))

    @classmethod
    def point(cls, a: float) -> "AlphaDistribution":
        return cls(AlphaKind.POINT, lo=float(a), hi=float(a))

    @classmethod
    def tabulated(cls, nodes, weights) -> "AlphaDistribution":
        return cls(AlphaKind.TABULATED, nodes=tuple(map(float, nodes)),
                   weights=tuple(map(float, weights)))

    @property
    def is_continuous(self) -> bool:
        return self.kind is AlphaKind.UNIFORM

    @property
    def support(self) -> tuple[float, float]:
        if self.kind is AlphaKind.TABULATED:
            return min(self.nodes), max(self.nodes)
        return self.lo, self.hi

    def pdf(self, alpha):
        """Density of the continuous kinds."""
        if self.kind is not AlphaKind.UNIFORM:
            raise TypeError(f"{self.kind.value} distribution has no density")
        alpha = np.asarray(alpha, dtype=float)
        inside = (alpha >= self.lo) & (alpha <= self.hi)
        return np.where(inside, 1.0 / (self.hi - self.lo), 0.0)

    def mean(self) -> float:
        if self.kind is AlphaKind.TABULATED:
            return math.fsum(a * w for a, w in zip(self.nodes, self.weights))
        return 0.5 * (self.lo + self.hi)

    def sample(self, rng: np.random.Generator) -> float:
        if self.kind is AlphaKind.UNIFORM:
            return float(rng.uniform(self.lo, self.hi))
        if self.kind is AlphaKind.POINT:
            return self.lo
        i = rng.choice(len(self.nodes), p=np.asarray(self.weights))
        return self.nodes[int(i)]

    def to_dict(self) -> dict:
        if self.kind is AlphaKind.TABULATED:
            return {"kind": self.kind.value, "nodes": list(self.nodes), "weights": list(self.weights)}
        if self.kind is AlphaKind.POINT:
            return {"kind": self.kind.value, "alpha": self.lo}
        return {"kind": self.kind.value, "lo": self.lo, "hi": self.hi}


class SplitModel(enum.Enum):
    """How the N qubits divide into Accept- and Reject-basis preparations."""

    BINOMIAL = "binomial"
    FIXED_EQUAL = "fixed"

    def check(self, n: int) -> None:
        if self is SplitModel.FIXED_EQUAL and n % 2:
            raise ValueError(f"fixed-equal split needs even N, got {n}")

    def log_weights(self, n: int) -> tuple[np.ndarray, np.ndarray]:
        """``(N_R values, log q(N_R))`` over the split's support."""
        self.check(n)
        if self is SplitModel.FIXED_EQUAL:
            return np.array([n // 2]), np.array([0.0])
        n_r = np.arange(n + 1)
        return n_r, LOG_FACTORIALS.log_comb_array(np.full_like(n_r, n), n_r) - n * LOG2
