"""Expected probability to cheat over the acceptance-ratio distribution.

``P_R(m; alpha, N_R)`` depends on ``alpha`` only through the integer limit
``ceil((1 - alpha) N_R)``, so as a function of ``alpha`` it is a step function
with jumps at ``alpha = 1 - j / N_R``. The sweep enumerates those jumps,
evaluates one representative ``alpha`` per constant piece, and integrates the
density over each piece separately.

For a given ``N_R`` every needed value comes from one contraction

    P_R[m, k] = sum_n H[m, n] F[n, k]

with ``H`` the hypergeometric law of ``n`` Reject-basis qubits among the
first ``m`` and ``F[n, k] = P[Binomial(n, 1/2) < k]``. Both tables are built
from log-factorials in log space and exponentiated entrywise; every entry lies
in [0, 1], so the contraction itself runs in linear space.
"""

from __future__ import annotations

import csv
import io
import json
import math
from dataclasses import dataclass, field
from fractions import Fraction

import numpy as np

from qcsign import thresholds
from qcsign.analysis.distributions import AlphaDistribution, AlphaKind, SplitModel
from qcsign.analysis.logspace import LOG2, LOG_FACTORIALS
from qcsign.analysis.probabilities import binom_tail, hypergeom_pmf, prob_reject_avg
from qcsign.analysis.quadrature import integrate_pieces

DEFAULT_QUAD_TOL = 1e-5
# Binomial split weights below exp(-60) are dropped from the sweep.
LOG_Q_CUTOFF = -60.0
_ROW_CHUNK = 1024
_TABLE_LIMIT = 20_000_000


@dataclass(frozen=True)
class AlphaPieces:
    """Representative ``alpha`` per constant piece and the probability mass of each."""

    points: np.ndarray
    weights: np.ndarray
    edges: np.ndarray | None = None
    quad_error: float = 0.0


def _active_split(N: int, split: SplitModel) -> tuple[np.ndarray, np.ndarray]:
    n_rs, log_q = split.log_weights(N)
    keep = log_q > LOG_Q_CUTOFF
    return n_rs[keep], np.exp(log_q[keep])


def alpha_breakpoints(lo: float, hi: float, n_rs) -> list[float]:
    """All ``alpha = 1 - j/N_R`` strictly inside ``(lo, hi)``, deduplicated exactly."""
    seen: set[Fraction] = set()
    for n_r in (int(v) for v in n_rs):
        if n_r == 0:
            continue
        j_lo = math.floor((1.0 - hi) * n_r)
        j_hi = math.ceil((1.0 - lo) * n_r)
        for j in range(max(j_lo, 0), j_hi + 1):
            a = Fraction(n_r - j, n_r)
            if lo < a < hi:
                seen.add(a)
    return [float(a) for a in sorted(seen)]


def alpha_pieces(alpha_dist: AlphaDistribution, N: int, split: SplitModel,
                 quad_tol: float = DEFAULT_QUAD_TOL) -> AlphaPieces:
    if alpha_dist.kind is AlphaKind.POINT:
        return AlphaPieces(np.array([alpha_dist.lo]), np.array([1.0]))
    if alpha_dist.kind is AlphaKind.TABULATED:
        return AlphaPieces(np.array(alpha_dist.nodes), np.array(alpha_dist.weights))
    n_rs, _ = _active_split(N, split)
    lo, hi = alpha_dist.support
    edges = np.array([lo, *alpha_breakpoints(lo, hi, n_rs), hi])
    quad = integrate_pieces(alpha_dist.pdf, edges, tol=quad_tol)
    points = 0.5 * (edges[:-1] + edges[1:])
    return AlphaPieces(points, quad.pieces, edges, quad.error)


def _binomial_cdf_table(n_max: int, k_max: int) -> np.ndarray:
    """``F[n, k] = P[Binomial(n, 1/2) < k]`` for ``0 <= n <= n_max, 0 <= k <= k_max``."""
    n = np.arange(n_max + 1)[:, None]
    i = np.arange(max(k_max, 1))[None, :]
    log_pmf = LOG_FACTORIALS.log_comb_array(n, i) - n * LOG2
    with np.errstate(invalid="ignore"):
        log_cdf = np.logaddexp.accumulate(log_pmf, axis=1)
    table = np.zeros((n_max + 1, k_max + 1))
    table[:, 1:] = np.minimum(1.0, np.exp(log_cdf[:, :k_max]))
    return table


def _hypergeom_rows(ms: np.ndarray, n_r: int, N: int,
                    log_comb: np.ndarray | None = None) -> np.ndarray:
    """Rows ``H[m, n]``; ``log_comb[a, b] = log C(a, b)`` may be passed precomputed."""
    n = np.arange(n_r + 1)[None, :]
    m = ms[:, None]
    if log_comb is None:
        lc = LOG_FACTORIALS.log_comb_array
        log_h = lc(m, n) + lc(N - m, n_r - n)
    else:
        log_h = log_comb[m, n] + log_comb[N - m, n_r - n]
    return np.exp(log_h - LOG_FACTORIALS.log_comb(N, n_r))


def reject_matrix(N: int, split: SplitModel, alphas, ms=None) -> np.ndarray:
    """``P_R(m; alpha)`` averaged over the split, for every ``m`` in ``ms`` and each ``alpha``.

    Returns an array of shape ``(len(ms), len(alphas))``.
    """
    split.check(N)
    alphas = np.atleast_1d(np.asarray(alphas, dtype=float))
    ms = np.arange(N + 1) if ms is None else np.atleast_1d(np.asarray(ms, dtype=np.int64))
    if ms.size and (ms.min() < 0 or ms.max() > N):
        raise ValueError(f"m must lie in [0, {N}]")
    order = np.argsort(alphas, kind="stable")
    sorted_alphas = alphas[order]
    n_rs, q = _active_split(N, split)
    limits = {int(nr): np.clip(thresholds.reject_limits(sorted_alphas, int(nr)), 0, None)
              for nr in n_rs}
    k_max = max(1, max(int(v.max()) for v in limits.values()))
    cdf = _binomial_cdf_table(int(n_rs.max()), k_max)
    log_comb = None
    if len(n_rs) > 1 and (N + 1) * (int(n_rs.max()) + 1) <= _TABLE_LIMIT:
        log_comb = LOG_FACTORIALS.log_comb_array(np.arange(N + 1)[:, None],
                                                 np.arange(int(n_rs.max()) + 1)[None, :])
    # Each N_R contributes a step function of alpha: store its value at the
    # first alpha and its jumps, then recover all columns with one cumsum.
    steps = np.zeros((len(ms), len(alphas)))
    for n_r, weight in zip(n_rs, q):
        n_r = int(n_r)
        ks, idx = np.unique(limits[n_r], return_inverse=True)
        jumps = np.flatnonzero(np.diff(idx)) + 1
        g = cdf[: n_r + 1, ks]
        for start in range(0, len(ms), _ROW_CHUNK):
            rows = slice(start, start + _ROW_CHUNK)
            block = _hypergeom_rows(ms[rows], n_r, N, log_comb) @ g
            steps[rows, 0] += weight * block[:, idx[0]]
            steps[rows, jumps] += weight * (block[:, idx[jumps]] - block[:, idx[jumps - 1]])
    out = np.empty_like(steps)
    out[:, order] = np.cumsum(steps, axis=1)
    return np.clip(out, 0.0, 1.0)


def cheat_matrix(N: int, split: SplitModel, alphas, ms=None) -> np.ndarray:
    p_r = reject_matrix(N, split, alphas, ms)
    return p_r * (1.0 - p_r)


def expected_prob_cheat(m: int, N: int, alpha_dist: AlphaDistribution, split: SplitModel,
                        quad_tol: float = DEFAULT_QUAD_TOL) -> float:
    """Average of ``P_ch(m; alpha)`` over ``p(alpha)``."""
    if not 0 <= m <= N:
        raise ValueError(f"m must lie in [0, {N}]")
    pieces = alpha_pieces(alpha_dist, N, split, quad_tol)
    return float(cheat_matrix(N, split, pieces.points, [m])[0] @ pieces.weights)


@dataclass
class FairnessCurve:
    N: int
    split: SplitModel
    alpha_dist: AlphaDistribution
    values: np.ndarray
    quad_tol: float = DEFAULT_QUAD_TOL
    quad_error: float = 0.0
    n_pieces: int = 1
    extra: dict = field(default_factory=dict)

    @property
    def m_star(self) -> int:
        # argmax returns the first maximiser, i.e. the smallest m on ties.
        return int(np.argmax(self.values))

    @property
    def sup(self) -> tuple[int, float]:
        m = self.m_star
        return m, float(self.values[m])

    def settings(self) -> dict:
        return {
            "N": self.N,
            "split": self.split.value,
            "alpha_distribution": self.alpha_dist.to_dict(),
            "quadrature": {"method": "composite Gauss-Legendre, panel doubling",
                           "tol": self.quad_tol, "error": self.quad_error,
                           "pieces": self.n_pieces},
        }

    def to_json(self) -> dict:
        m, value = self.sup
        return {**self.settings(), "sup": {"m": m, "value": value},
                "values": [float(v) for v in self.values], **self.extra}

    def to_csv(self) -> str:
        buf = io.StringIO()
        writer = csv.writer(buf, lineterminator="\n")
        writer.writerow(["m", "expected_prob_cheat"])
        for m, v in enumerate(self.values):
            writer.writerow([m, repr(float(v))])
        return buf.getvalue()


def fairness_curve(N: int, alpha_dist: AlphaDistribution, split: SplitModel,
                   quad_tol: float = DEFAULT_QUAD_TOL) -> FairnessCurve:
    """Expected probability to cheat for every abort step ``m = 0..N``."""
    if N < 1:
        raise ValueError("N must be at least 1")
    split.check(N)
    pieces = alpha_pieces(alpha_dist, N, split, quad_tol)
    values = cheat_matrix(N, split, pieces.points) @ pieces.weights
    return FairnessCurve(N, split, alpha_dist, np.clip(values, 0.0, 0.25), quad_tol,
                         pieces.quad_error, len(pieces.points))


def sup_expected_cheat(N: int, alpha_dist: AlphaDistribution, split: SplitModel,
                       quad_tol: float = DEFAULT_QUAD_TOL) -> tuple[int, float]:
    return fairness_curve(N, alpha_dist, split, quad_tol).sup


@dataclass(frozen=True)
class ScalingFit:
    slope: float
    intercept: float
    residual_norm: float

    @property
    def prefactor(self) -> float:
        return math.exp(self.intercept)


def scaling_fit(points) -> ScalingFit:
    """Least-squares line through ``(log N, log sup)``."""
    points = [(int(n), float(v)) for n, v in points]
    if len(points) < 3:
        raise ValueError(f"need at least 3 points for a scaling fit, got {len(points)}")
    ns = [n for n, _ in points]
    if len(set(ns)) != len(ns):
        raise ValueError(f"duplicate N in scaling points: {sorted(ns)}")
    if any(n <= 0 or v <= 0 for n, v in points):
        raise ValueError("scaling points must be positive")
    x = np.log(np.array(ns, dtype=float))
    y = np.log(np.array([v for _, v in points]))
    slope, intercept = np.polyfit(x, y, 1)
    resid = y - (slope * x + intercept)
    return ScalingFit(float(slope), float(intercept), float(np.linalg.norm(resid)))


@dataclass(frozen=True)
class RiskCheck:
    delta: float
    threshold: float
    expected_cheat: float
    probability: float
    precondition_met: bool

    @property
    def bound(self) -> float:
        return 1.0 - self.delta

    @property
    def passed(self) -> bool:
        return self.precondition_met and self.probability >= self.bound


def chebyshev_risk_check(N: int, m: int, delta: float, alpha_dist: AlphaDistribution,
                         split: SplitModel, quad_tol: float = DEFAULT_QUAD_TOL) -> RiskCheck:
    """Measure ``Prob_alpha[Y < delta + delta**3]`` with ``Y = P_ch(m; alpha)``.

    The bound ``>= 1 - delta`` is only claimed when ``E[Y] <= delta**3``.
    """
    if not 0.0 < delta < 1.0:
        raise ValueError("delta must lie in (0, 1)")
    pieces = alpha_pieces(alpha_dist, N, split, quad_tol)
    y = cheat_matrix(N, split, pieces.points, [m])[0]
    expected = float(y @ pieces.weights)
    threshold = delta + delta ** 3
    probability = float(np.sum(pieces.weights[y < threshold]))
    met = expected <= delta ** 3 * (1.0 + 1e-12)
    return RiskCheck(delta, threshold, expected, min(1.0, probability), met)


def prob_accept(delta_m: int, alpha: float, n_accept: int, N: int) -> float:
    """Chance to still accept after ``delta_m`` Reject measurements at random positions."""
    allowed = n_accept - thresholds.required_accept_correct(alpha, n_accept)
    total = 0.0
    for a in range(max(0, delta_m - (N - n_accept)), min(delta_m, n_accept) + 1):
        total += hypergeom_pmf(a, delta_m, n_accept, N).prob * binom_tail(a, allowed).prob
    return min(1.0, total)


def prob_cheat_mixture(m: int, alpha: float, N: int, split: SplitModel,
                       delta_m_weights: dict[int, float]) -> float:
    """Strategy-averaged probability to cheat for a dishonest Bob.

    ``delta_m_weights[d]`` is the probability that Bob measured the Reject
    observable on ``d`` of his first ``m`` qubits. Bob's reject chance equals
    an honest client's at step ``m - d``; his accept chance accounts for wrong
    results on Accept-basis qubits among the ``d``. With all weight on
    ``d = 0`` this reduces to :func:`prob_cheat`.
    """
    total_w = math.fsum(delta_m_weights.values())
    if any(w < 0 for w in delta_m_weights.values()) or abs(total_w - 1.0) > 1e-9:
        raise ValueError("delta_m weights must be a probability distribution")
    if any(not 0 <= d <= m for d in delta_m_weights):
        raise ValueError(f"delta_m must lie in [0, {m}]")
    n_rs, log_q = split.log_weights(N)
    q = np.exp(log_q)
    p_r_alice = prob_reject_avg(m, alpha, N, split).prob
    out = 0.0
    for d, w in sorted(delta_m_weights.items()):
        if w == 0:
            continue
        p_r_bob = prob_reject_avg(m - d, alpha, N, split).prob
        p_a_bob = float(sum(qq * prob_accept(d, alpha, N - int(nr), N) for nr, qq in zip(n_rs, q)))
        bind_a = 1.0 - p_r_bob
        bind_b = p_a_bob * (1.0 - p_r_alice)
        out += w * bind_b * (1.0 - bind_a)
    return out


def curve_to_json(curve: FairnessCurve) -> str:
    return json.dumps(curve.to_json(), indent=2, sort_keys=True)
