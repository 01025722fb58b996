"""Exact-rational brute-force oracle for the probability to reject.

Enumerates every placement of the Reject-basis qubits and every pattern of
Accept-measurement outcomes on them, counting wrong results bit by bit. It
shares no code with the log-space evaluation and is meant for N <= 12.
"""

from __future__ import annotations

import itertools
from fractions import Fraction
from functools import lru_cache

from qcsign.analysis.probabilities import prob_reject

ORACLE_ALPHAS = (0.55, 0.7, 0.9)
ORACLE_MAX_N = 12
ORACLE_RTOL = 1e-12


def exact_alpha(alpha) -> Fraction:
    if isinstance(alpha, Fraction):
        return alpha
    return Fraction(str(alpha))


def _can_reject(wrong: int, alpha: Fraction, n_reject: int) -> bool:
    if n_reject == 0:
        return True
    return wrong < (1 - alpha) * n_reject


@lru_cache(maxsize=None)
def _favourable_patterns(n: int, alpha: Fraction, n_reject: int) -> int:
    """Outcome patterns on ``n`` qubits that still allow rejection."""
    return sum(1 for pattern in range(2 ** n)
               if _can_reject(bin(pattern).count("1"), alpha, n_reject))


def prob_reject_exact(m: int, alpha, n_reject: int, n: int) -> Fraction:
    """Exact P_R(m; alpha, N_R) over all C(N, N_R) equally likely placements."""
    a = exact_alpha(alpha)
    total = Fraction(0)
    placements = 0
    for reject_positions in itertools.combinations(range(n), n_reject):
        placements += 1
        early = sum(1 for p in reject_positions if p < m)
        total += Fraction(_favourable_patterns(early, a, n_reject), 2 ** early)
    return total / placements


def prob_reject_avg_exact(m: int, alpha, n: int, split: str = "binomial") -> Fraction:
    """Average over every basis sequence (binomial) or fixed half split."""
    a = exact_alpha(alpha)
    if split == "fixed":
        return prob_reject_exact(m, a, n // 2, n)
    total = Fraction(0)
    for bases in itertools.product((0, 1), repeat=n):
        n_reject = bases.count(0)
        early = bases[:m].count(0)
        total += Fraction(_favourable_patterns(early, a, n_reject), 2 ** early)
    return total / 2 ** n


def prob_cheat_exact(m: int, alpha, n: int, split: str = "binomial") -> Fraction:
    p = prob_reject_avg_exact(m, alpha, n, split)
    return p * (1 - p)


def oracle_suite(max_n: int = ORACLE_MAX_N, alphas=ORACLE_ALPHAS, rtol: float = ORACLE_RTOL):
    """Compare the log-space probability to reject with the oracle on every small case.

    Returns ``(checked, worst_relative_error, failures)``.
    """
    failures = []
    checked = 0
    worst = 0.0
    for n in range(1, max_n + 1):
        for n_r in range(n + 1):
            for m in range(n + 1):
                for alpha in alphas:
                    exact = float(prob_reject_exact(m, alpha, n_r, n))
                    got = prob_reject(m, alpha, n_r, n).prob
                    err = abs(got - exact) / exact if exact else abs(got)
                    worst = max(worst, err)
                    checked += 1
                    if err > rtol:
                        failures.append({"N": n, "N_R": n_r, "m": m, "alpha": alpha,
                                         "exact": exact, "log_space": got})
    return checked, worst, failures
