"""Monte Carlo harness over simulated protocol sessions.

``run_trials`` drives the full protocol (session, exchange, completion,
verdict) once per trial, with the trial's random stream keyed by
``(seed, trial index)`` so reports do not depend on execution order.
Detection curves and the cross-validation grid need 1e5 draws per point and
use a vectorised sampler instead; it applies the same Born tables and
threshold rules and is checked against the protocol path in the tests.
"""

from __future__ import annotations

import collections
import csv
import io
import json
import math
from dataclasses import dataclass, field

import numpy as np
from scipy import stats

from qcsign import __version__, thresholds
from qcsign.analysis import (
    AlphaDistribution,
    SplitModel,
    detection_prob_rotated,
    detection_prob_rotated_exact,
    prob_reject_avg,
)
from qcsign.protocol.binding import BindingClaim, CheaterFlag, Verdict, binding_verdict
from qcsign.protocol.exchange import AbortReason, Exchange, ExchangeTranscript
from qcsign.protocol.session import SessionRecord, init_session
from qcsign.protocol.strategy import Intent, Strategy, StrategyKind
from qcsign.quantum import (
    ACCEPT_OBS,
    DESCRIPTORS,
    NOISELESS,
    REJECT_OBS,
    NoiseModel,
    Observable,
    outcome_distribution,
)

CONFIDENCE = 0.95
Z_LIMIT = 4.0
_CHUNK_CELLS = 2_000_000


def clopper_pearson(k: int, n: int, confidence: float = CONFIDENCE) -> tuple[float, float]:
    """Exact binomial confidence interval for ``k`` successes in ``n`` trials."""
    if n <= 0:
        raise ValueError("n must be positive")
    a = 1.0 - confidence
    lo = 0.0 if k == 0 else float(stats.beta.ppf(a / 2, k, n - k + 1))
    hi = 1.0 if k == n else float(stats.beta.ppf(1 - a / 2, k + 1, n - k))
    return lo, hi


@dataclass(frozen=True)
class Estimate:
    successes: int
    trials: int

    @property
    def value(self) -> float:
        return self.successes / self.trials

    @property
    def ci(self) -> tuple[float, float]:
        return clopper_pearson(self.successes, self.trials)

    @property
    def half_width(self) -> float:
        lo, hi = self.ci
        return 0.5 * (hi - lo)

    def to_dict(self) -> dict:
        lo, hi = self.ci
        return {"value": self.value, "successes": self.successes, "trials": self.trials, "ci95": [lo, hi],
                "half_width": self.half_width}


@dataclass
class TrialReport:
    """Aggregated counts over ``trials`` protocol runs.

    ``bind_a`` counts contracts valid when Alice completes with Bind and Bob
    with Refuse; ``bind_b`` is the mirror scenario. ``valid`` uses each
    strategy's own intent.
    """

    N: int
    trials: int
    seed: int
    strat_a: Strategy
    strat_b: Strategy
    noise: NoiseModel
    alpha_dist: AlphaDistribution
    valid: int = 0
    bind_a: int = 0
    bind_b: int = 0
    cheater_flags: collections.Counter = field(default_factory=collections.Counter)
    abort_reasons: collections.Counter = field(default_factory=collections.Counter)
    detection_steps: collections.Counter = field(default_factory=collections.Counter)

    @property
    def aborted(self) -> int:
        return self.trials - self.abort_reasons[AbortReason.NONE.value]

    @property
    def p_valid(self) -> Estimate:
        return Estimate(self.valid, self.trials)

    @property
    def p_bind_a(self) -> Estimate:
        return Estimate(self.bind_a, self.trials)

    @property
    def p_bind_b(self) -> Estimate:
        return Estimate(self.bind_b, self.trials)

    def config(self) -> dict:
        return {"N": self.N, "trials": self.trials, "seed": self.seed,
                "strategy_a": self.strat_a.describe(), "strategy_b": self.strat_b.describe(),
                "noise": {"flip_prob": self.noise.flip_prob, "eta": self.noise.eta},
                "alpha_distribution": self.alpha_dist.to_dict()}

    def to_json(self) -> dict:
        return {
            "version": __version__,
            "config": self.config(),
            "p_valid": self.p_valid.to_dict(),
            "p_bind_a": self.p_bind_a.to_dict(),
            "p_bind_b": self.p_bind_b.to_dict(),
            "aborted": self.aborted,
            "abort_reasons": {r.value: self.abort_reasons[r.value] for r in AbortReason},
            "cheater_flags": {f.name.lower(): self.cheater_flags[f.name.lower()] for f in CheaterFlag},
            "detection_histogram": {str(k): v for k, v in sorted(self.detection_steps.items())},
        }

    def to_csv(self) -> str:
        buf = io.StringIO()
        w = csv.writer(buf, lineterminator="\n")
        w.writerow(["quantity", "value", "successes", "trials", "ci_lo", "ci_hi"])
        for name, est in (("p_valid", self.p_valid), ("p_bind_a", self.p_bind_a),
                          ("p_bind_b", self.p_bind_b)):
            lo, hi = est.ci
            w.writerow([name, repr(est.value), est.successes, est.trials, repr(lo), repr(hi)])
        for r in AbortReason:
            w.writerow([f"abort:{r.value}", self.abort_reasons[r.value], "", self.trials, "", ""])
        for step, count in sorted(self.detection_steps.items()):
            w.writerow([f"abort_step:{step}", count, "", self.trials, "", ""])
        return buf.getvalue()


@dataclass(frozen=True)
class TrialOutcome:
    session: SessionRecord
    transcript: ExchangeTranscript
    alpha: float
    claims: tuple[BindingClaim, BindingClaim]
    verdict: Verdict
    bind_a: bool
    bind_b: bool


def run_single(N: int, strat_a: Strategy, strat_b: Strategy, noise: NoiseModel,
               alpha_dist: AlphaDistribution, seed: int, t: int = 0,
               deadline: int | None = None) -> TrialOutcome:
    """Trial ``t`` of the seeded sequence run by :func:`run_trials`."""
    r_session, r_exchange, r_alpha, r_done = np.random.default_rng([seed, t]).spawn(4)
    session = init_session(N, r_session, session_id=t + 1, deadline=deadline)
    ex = Exchange(session, strat_a, strat_b, noise, r_exchange)
    transcript = ex.run()
    alpha = alpha_dist.sample(r_alpha)
    r_own, r_a, r_b = r_done.spawn(3)
    claims = ex.claims(rng=r_own)
    verdict = binding_verdict(session, *claims, alpha, noise.eta)
    bind_a = binding_verdict(session, *ex.claims(Intent.BIND, Intent.REFUSE, r_a),
                             alpha, noise.eta).contract_valid
    bind_b = binding_verdict(session, *ex.claims(Intent.REFUSE, Intent.BIND, r_b),
                             alpha, noise.eta).contract_valid
    return TrialOutcome(session, transcript, alpha, claims, verdict, bind_a, bind_b)


def run_trials(N: int, strat_a: Strategy, strat_b: Strategy, noise: NoiseModel = NOISELESS,
               alpha_dist: AlphaDistribution | None = None, trials: int = 1000,
               seed: int = 0, deadline: int | None = None) -> TrialReport:
    """Full protocol runs: init, exchange, completion per intent, alpha draw, verdict."""
    if trials < 1:
        raise ValueError("trials must be at least 1")
    if N < 1:
        raise ValueError("N must be at least 1")
    strat_a.validate(N)
    strat_b.validate(N)
    alpha_dist = AlphaDistribution.uniform() if alpha_dist is None else alpha_dist
    report = TrialReport(N, trials, seed, strat_a, strat_b, noise, alpha_dist)
    for t in range(trials):
        out = run_single(N, strat_a, strat_b, noise, alpha_dist, seed, t, deadline)
        report.abort_reasons[out.transcript.abort_reason.value] += 1
        if out.transcript.aborted:
            report.detection_steps[out.transcript.abort_step] += 1
        report.valid += out.verdict.contract_valid
        report.cheater_flags[out.verdict.cheater.name.lower()] += 1
        report.bind_a += out.bind_a
        report.bind_b += out.bind_b
    return report


# Vectorised sampling -------------------------------------------------------

def _p1_column(obs: Observable | None) -> np.ndarray:
    """P(outcome 1) for each of the four descriptors; a guess is a fair coin."""
    if obs is None:
        return np.full(4, 0.5)
    return np.array([outcome_distribution(d, obs).p1 for d in DESCRIPTORS])


def _sample_reports(desc: np.ndarray, p1: np.ndarray, flip: float,
                    rng: np.random.Generator) -> np.ndarray:
    """Outcome bits for descriptor indices ``desc`` with per-column tables ``p1[:, col]``."""
    cols = np.arange(desc.shape[1])
    bits = rng.random(desc.shape) < p1[desc, cols]
    if flip > 0.0:
        bits ^= rng.random(desc.shape) < flip
    return bits


def _detection_steps(desc: np.ndarray, bits: np.ndarray, eta: float) -> np.ndarray:
    """First round at which the observer's mismatch budget is exceeded (0 = never)."""
    basis, state = desc >> 1, desc & 1
    mism = np.cumsum((basis == 1) & (bits != state.astype(bool)), axis=1)
    budget = np.floor(eta * np.arange(1, desc.shape[1] + 1) + 1e-12)
    over = mism > budget
    return np.where(over.any(axis=1), over.argmax(axis=1) + 1, 0)


def sample_exchange_aborts(N: int, strat_a: Strategy, strat_b: Strategy, noise: NoiseModel,
                           trials: int, rng: np.random.Generator) -> tuple[np.ndarray, np.ndarray]:
    """Vectorised Exchange phase: ``(abort step or 0, detector)`` per trial.

    ``detector`` is 0 when Alice caught Bob and 1 when Bob caught Alice
    (meaningless where the step is 0). Halting and deadlines are not modelled.
    """
    for s in (strat_a, strat_b):
        s.validate(N)
        if s.halt_after is not None:
            raise ValueError("the vectorised sampler does not model halting clients")
    p1_a = np.stack([_p1_column(strat_a.observable(m)) for m in range(1, N + 1)], axis=1)
    p1_b = np.stack([_p1_column(strat_b.observable(m)) for m in range(1, N + 1)], axis=1)
    desc_a = rng.integers(0, 4, size=(trials, N))
    desc_b = rng.integers(0, 4, size=(trials, N))
    bits_a = _sample_reports(desc_a, p1_a, noise.flip_prob, rng)
    bits_b = _sample_reports(desc_b, p1_b, noise.flip_prob, rng)
    caught_a = _detection_steps(desc_a, bits_a, noise.eta)   # Bob catches Alice
    caught_b = _detection_steps(desc_b, bits_b, noise.eta)   # Alice catches Bob
    inf = N + 1
    sa = np.where(caught_a == 0, inf, caught_a)
    sb = np.where(caught_b == 0, inf, caught_b)
    # Alice's report of round m is checked before Bob's.
    step = np.minimum(sa, sb)
    detector = np.where(sa <= sb, 1, 0)
    return np.where(step == inf, 0, step), detector


@dataclass(frozen=True)
class DetectionRow:
    delta_m: int
    round: int
    detected: int
    trials: int
    exact: float
    approx: float

    @property
    def estimate(self) -> Estimate:
        return Estimate(self.detected, self.trials)

    def within_ci(self, confidence: float = CONFIDENCE) -> bool:
        lo, hi = clopper_pearson(self.detected, self.trials, confidence)
        return lo <= self.exact <= hi


@dataclass
class DetectionCurve:
    strategy: Strategy
    N: int
    trials: int
    seed: int
    noise: NoiseModel
    rows: list[DetectionRow]

    def passed(self, confidence: float = CONFIDENCE) -> bool:
        """Every row inside a simultaneous band of the given confidence (Bonferroni)."""
        if not self.rows:
            return True
        per_row = 1.0 - (1.0 - confidence) / len(self.rows)
        return all(r.within_ci(per_row) for r in self.rows)

    def to_csv(self) -> str:
        buf = io.StringIO()
        w = csv.writer(buf, lineterminator="\n")
        w.writerow(["delta_m", "round", "empirical", "exact", "approx", "ci_lo", "ci_hi", "within_ci"])
        for r in self.rows:
            lo, hi = r.estimate.ci
            w.writerow([r.delta_m, r.round, repr(r.estimate.value), repr(r.exact), repr(r.approx),
                        repr(lo), repr(hi), int(r.within_ci())])
        return buf.getvalue()

    def to_json(self) -> dict:
        return {"version": __version__,
                "config": {"strategy": self.strategy.describe(), "N": self.N, "trials": self.trials,
                           "seed": self.seed, "noise": {"flip_prob": self.noise.flip_prob,
                                                        "eta": self.noise.eta}},
                "rows": [{"delta_m": r.delta_m, "round": r.round, "exact": r.exact,
                          "approx": r.approx, **r.estimate.to_dict(), "within_ci": r.within_ci()}
                         for r in self.rows],
                "passed_familywise": self.passed()}


def _fold_rotated(k: int, q: float, fn) -> float:
    """Average ``fn(k_a, q)`` over the Accept-basis count ``k_a ~ Bin(k, 1/2)``."""
    ka = np.arange(k + 1)
    w = stats.binom.pmf(ka, k, 0.5)
    return float(sum(wi * fn(int(a), q) for wi, a in zip(w, ka)))


def expected_detection(strategy: Strategy, delta_m: int) -> tuple[float, float]:
    """Noiseless chance of detection within ``delta_m`` deviating rounds.

    Returns ``(exact, approx)``. Reject measurements and guesses both give
    ``1 - (3/4)**delta_m``; a rotated observable contributes
    ``1 - ((1+q_a)/2)**k_a`` on its ``k_a`` Accept-basis qubits, and
    ``approx`` substitutes the ``1 - (1/2)**((1-q_a) k_a)`` form instead.
    """
    if strategy.kind is StrategyKind.ROTATED:
        q = min(1.0, max(0.0, math.cos(strategy.theta)))
        if math.cos(strategy.theta) < 0:
            raise ValueError("detection law is defined for theta in [0, pi/2]")
        return (_fold_rotated(delta_m, q, detection_prob_rotated_exact),
                _fold_rotated(delta_m, q, detection_prob_rotated))
    if strategy.kind is StrategyKind.HONEST:
        return 0.0, 0.0
    p = 1.0 - 0.75 ** delta_m
    return p, p


def estimate_detection_curve(strategy: Strategy, N: int, trials: int, seed: int,
                             noise: NoiseModel = NOISELESS) -> DetectionCurve:
    """Empirical P(Alice has caught Bob within his first ``delta_m`` deviating rounds)."""
    if trials < 1:
        raise ValueError("trials must be at least 1")
    strategy.validate(N)
    rounds = [m for m in range(1, N + 1) if strategy.deviates(m)]
    rng = np.random.default_rng(seed)
    caught_at = np.zeros(N + 2, dtype=np.int64)
    per_chunk = max(1, _CHUNK_CELLS // (2 * N))
    done = 0
    while done < trials:
        n = min(per_chunk, trials - done)
        step, detector = sample_exchange_aborts(N, Strategy.honest(), strategy, noise, n, rng)
        hit = (step > 0) & (detector == 0)
        caught_at += np.bincount(step[hit], minlength=N + 2)
        done += n
    cumulative = np.cumsum(caught_at)
    rows = []
    for k, m in enumerate(rounds, start=1):
        exact, approx = expected_detection(strategy, k)
        rows.append(DetectionRow(k, m, int(cumulative[m]), trials, exact, approx))
    return DetectionCurve(strategy, N, trials, seed, noise, rows)


# Cross-validation against the analysis --------------------------------------

def default_grid() -> list[tuple[int, int, float]]:
    cells = []
    for N in (2, 10, 30, 60, 100):
        for m in sorted({0, 1, N // 4, N // 2, N}):
            for alpha in (0.6, 0.75, 0.9):
                cells.append((N, m, alpha))
    return cells


def sample_reject_ability(N: int, m: int, alpha: float, trials: int,
                          rng: np.random.Generator) -> int:
    """Count trials in which an honest client can still reject after ``m`` rounds.

    The client measures its first ``m`` qubits with the Accept observable,
    completes the rest with the Reject observable, and claims Reject for
    every qubit. The count of successful rejections is returned.
    """
    obs = [ACCEPT_OBS if j < m else REJECT_OBS for j in range(N)]
    p1 = np.stack([_p1_column(o) for o in obs], axis=1)
    limits = np.array([thresholds.reject_limit(alpha, nr) for nr in range(N + 1)])
    hits = 0
    per_chunk = max(1, _CHUNK_CELLS // N)
    done = 0
    while done < trials:
        n = min(per_chunk, trials - done)
        desc = rng.integers(0, 4, size=(n, N))
        bits = _sample_reports(desc, p1, 0.0, rng)
        reject_basis = (desc >> 1) == 0
        wrong = np.sum(reject_basis & (bits != (desc & 1).astype(bool)), axis=1)
        n_r = reject_basis.sum(axis=1)
        hits += int(np.count_nonzero(wrong < limits[n_r]))
        done += n
    return hits


@dataclass(frozen=True)
class ValidationCell:
    N: int
    m: int
    alpha: float
    trials: int
    hits: int
    expected: float

    @property
    def empirical(self) -> float:
        return self.hits / self.trials

    @property
    def sigma(self) -> float:
        return math.sqrt(self.expected * (1.0 - self.expected) / self.trials)

    @property
    def z(self) -> float:
        diff = self.empirical - self.expected
        if self.sigma == 0.0:
            return 0.0 if abs(diff) < 1e-12 else math.copysign(math.inf, diff)
        return diff / self.sigma

    @property
    def passed(self) -> bool:
        return abs(self.z) <= Z_LIMIT


@dataclass
class ValidationTable:
    cells: list[ValidationCell]
    seed: int
    split: SplitModel = SplitModel.BINOMIAL

    @property
    def pass_fraction(self) -> float:
        return sum(c.passed for c in self.cells) / len(self.cells)

    def passed(self, required: float = 0.95) -> bool:
        return self.pass_fraction >= required

    def to_csv(self) -> str:
        buf = io.StringIO()
        w = csv.writer(buf, lineterminator="\n")
        w.writerow(["N", "m", "alpha", "trials", "empirical", "expected", "sigma", "z", "passed"])
        for c in self.cells:
            w.writerow([c.N, c.m, c.alpha, c.trials, repr(c.empirical), repr(c.expected),
                        repr(c.sigma), repr(c.z), int(c.passed)])
        return buf.getvalue()

    def to_json(self) -> dict:
        return {"version": __version__, "seed": self.seed, "split": self.split.value,
                "pass_fraction": self.pass_fraction,
                "cells": [{"N": c.N, "m": c.m, "alpha": c.alpha, "trials": c.trials,
                           "empirical": c.empirical, "expected": c.expected, "z": c.z,
                           "passed": c.passed} for c in self.cells]}


def validate_against_analysis(grid=None, trials: int = 100_000, seed: int = 0) -> ValidationTable:
    """Empirical reject ability vs ``prob_reject_avg`` (binomial split) per grid cell."""
    grid = default_grid() if grid is None else list(grid)
    cells = []
    for i, (N, m, alpha) in enumerate(grid):
        if not 0 <= m <= N:
            raise ValueError(f"grid cell {(N, m, alpha)}: m outside [0, N]")
        rng = np.random.default_rng([seed, i])
        hits = sample_reject_ability(N, m, alpha, trials, rng)
        expected = prob_reject_avg(m, alpha, N, SplitModel.BINOMIAL).prob
        cells.append(ValidationCell(N, m, alpha, trials, hits, expected))
    return ValidationTable(cells, seed)


def report_json(obj) -> str:
    return json.dumps(obj, indent=2, sort_keys=True)
