"""Log-domain probability representation and stable summation."""

from __future__ import annotations

import math
from dataclasses import dataclass
from collections.abc import Iterable

import numpy as np
from scipy.special import gammaln

LOG2 = math.log(2.0)


@dataclass(frozen=True, order=True)
class LogProb:
    """A probability stored as its natural log; ``-inf`` is an exact zero."""

    log: float

    @classmethod
    def zero(cls) -> "LogProb":
        return cls(-math.inf)

    @classmethod
    def one(cls) -> "LogProb":
        return cls(0.0)

    @classmethod
    def from_prob(cls, p: float) -> "LogProb":
        if p < 0.0:
            raise ValueError(f"negative probability {p}")
        return cls(math.log(p)) if p > 0.0 else cls.zero()

    @property
    def is_zero(self) -> bool:
        return self.log == -math.inf

    @property
    def prob(self) -> float:
        # Rounding in composed sums may push a certain event a hair above 1.
        return min(1.0, math.exp(self.log))

    def __float__(self) -> float:
        return self.prob

    def __mul__(self, other: "LogProb") -> "LogProb":
        return LogProb(self.log + other.log)

    def complement(self) -> "LogProb":
        p = self.prob
        if p >= 1.0:
            return LogProb.zero()
        if self.log < -0.5:
            return LogProb(math.log1p(-p))
        return LogProb(math.log(-math.expm1(self.log)))


def logsumexp(logs: Iterable[float]) -> float:
    """Max-shifted log-sum-exp with compensated (fsum) accumulation."""
    xs = [x for x in logs if x != -math.inf]
    if not xs:
        return -math.inf
    top = max(xs)
    return top + math.log(math.fsum(math.exp(x - top) for x in xs))


class LogFactorials:
    """Growable table of ``log(k!)``."""

    def __init__(self, size: int = 1024):
        self._table = gammaln(np.arange(size + 1, dtype=float) + 1.0)

    def ensure(self, n: int) -> np.ndarray:
        if n >= len(self._table):
            size = max(n + 1, 2 * len(self._table))
            self._table = gammaln(np.arange(size, dtype=float) + 1.0)
        return self._table

    def __getitem__(self, k: int) -> float:
        return float(self.ensure(k)[k])

    def log_comb(self, n: int, k: int) -> float:
        if k < 0 or k > n:
            return -math.inf
        t = self.ensure(n)
        return float(t[n] - t[k] - t[n - k])

    def log_comb_array(self, n: np.ndarray, k: np.ndarray) -> np.ndarray:
        """Vectorised ``log C(n, k)``; ``-inf`` outside ``0 <= k <= n``."""
        n = np.asarray(n)
        k = np.asarray(k)
        n, k = np.broadcast_arrays(n, k)
        t = self.ensure(int(n.max(initial=0)))
        ok = (k >= 0) & (k <= n)
        kk = np.where(ok, k, 0)
        nn = np.where(ok, n, 0)
        out = t[nn] - t[kk] - t[nn - kk]
        return np.where(ok, out, -np.inf)


LOG_FACTORIALS = LogFactorials()
