"""Scalar probabilities to reject and to cheat, evaluated in log space.

All quantities concern an honest client who measured the Accept observable
on the first ``m`` of ``N`` qubits and then tries to reject the contract by
measuring the Reject observable on the rest. ``N_R`` of the ``N`` qubits were
prepared in the Reject basis.
"""

from __future__ import annotations

import math

from qcsign import thresholds
from qcsign.analysis.distributions import SplitModel
from qcsign.analysis.logspace import LOG2, LOG_FACTORIALS, LogProb, logsumexp


def binom_tail(n: int, T: int) -> LogProb:
    """``2**-n * sum_{i=0}^{min(T, n)} C(n, i)``: P[Binomial(n, 1/2) <= T]."""
    if n < 0:
        raise ValueError(f"n must be non-negative, got {n}")
    if T < 0:
        return LogProb.zero()
    if T >= n:
        return LogProb.one()
    return LogProb(logsumexp(LOG_FACTORIALS.log_comb(n, i) for i in range(T + 1)) - n * LOG2)


def reject_ability(n: int, alpha: float, N_R: int) -> LogProb:
    """Chance to still reject when ``n`` Reject-basis qubits were measured in Accept.

    Each such qubit gives a wrong result with probability 1/2; rejection
    needs fewer wrong results than ``(1 - alpha) * N_R``.
    """
    if not 0 <= n <= N_R:
        raise ValueError(f"need 0 <= n <= N_R, got n={n}, N_R={N_R}")
    return binom_tail(n, thresholds.allowed_reject_wrong(alpha, N_R))


def hypergeom_pmf(n: int, m: int, N_R: int, N: int) -> LogProb:
    """Probability that exactly ``n`` of the first ``m`` qubits are Reject-basis."""
    if not (0 <= m <= N and 0 <= N_R <= N):
        raise ValueError(f"need 0 <= m, N_R <= N, got m={m}, N_R={N_R}, N={N}")
    if n < max(0, m - (N - N_R)) or n > min(m, N_R):
        return LogProb.zero()
    lc = LOG_FACTORIALS.log_comb
    return LogProb(lc(m, n) + lc(N - m, N_R - n) - lc(N, N_R))


def prob_reject(m: int, alpha: float, N_R: int, N: int) -> LogProb:
    """P_R(m; alpha, N_R) for a fixed number of Reject-basis qubits."""
    if not 0 <= m <= N:
        raise ValueError(f"need 0 <= m <= N, got m={m}, N={N}")
    if not 0 <= N_R <= N:
        raise ValueError(f"need 0 <= N_R <= N, got N_R={N_R}, N={N}")
    if m < thresholds.reject_limit(alpha, N_R):
        return LogProb.one()
    lo = max(0, m - (N - N_R))
    hi = min(m, N_R)
    terms = (hypergeom_pmf(n, m, N_R, N).log + reject_ability(n, alpha, N_R).log
             for n in range(lo, hi + 1))
    return LogProb(min(0.0, logsumexp(terms)))


def prob_reject_avg(m: int, alpha: float, N: int, split: SplitModel) -> LogProb:
    """Expected probability to reject, averaged over the basis split."""
    n_rs, log_q = split.log_weights(N)
    terms = (lq + prob_reject(m, alpha, int(nr), N).log for nr, lq in zip(n_rs, log_q))
    return LogProb(min(0.0, logsumexp(terms)))


def prob_cheat(m: int, alpha: float, N: int, split: SplitModel) -> LogProb:
    """P_ch = P_R (1 - P_R); never exceeds 1/4."""
    p_r = prob_reject_avg(m, alpha, N, split)
    return p_r * p_r.complement()


def detection_prob(delta_m: int) -> float:
    """Chance that ``delta_m`` Reject measurements reveal at least one wrong result."""
    if delta_m < 0:
        raise ValueError("delta_m must be non-negative")
    return -math.expm1(delta_m * math.log(0.75))


def detection_prob_rotated(k_a: int, q_a: float) -> float:
    """Detection after ``k_a`` rotated measurements on Accept-basis qubits.

    Uses the effective count ``(1 - q_a) * k_a`` of Reject measurements, each
    wrong with probability 1/2.
    """
    _check_rotated(k_a, q_a)
    return -math.expm1((1.0 - q_a) * k_a * math.log(0.5))


def detection_prob_rotated_exact(k_a: int, q_a: float) -> float:
    """Per-qubit form: each rotated measurement is right with probability (1 + q_a)/2."""
    _check_rotated(k_a, q_a)
    right = 0.5 * (1.0 + q_a)
    if right == 1.0:
        return 0.0
    return -math.expm1(k_a * math.log(right))


def _check_rotated(k_a: int, q_a: float) -> None:
    if k_a < 0:
        raise ValueError("k_a must be non-negative")
    if not 0.0 <= q_a <= 1.0:
        raise ValueError(f"q_a = cos(theta) must lie in [0, 1], got {q_a}")
