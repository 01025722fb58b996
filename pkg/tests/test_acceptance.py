"""Acceptance suite: one PASS/FAIL line per criterion at the pinned tolerances.

Run ``pytest tests/test_acceptance.py -s`` or look at the captured summary
lines in the normal ``pytest -v`` output.
"""

import itertools
import json
import subprocess
import sys

import numpy as np
import pytest
from scipy import stats

from qcsign.analysis import (
    AlphaDistribution,
    SplitModel,
    chebyshev_risk_check,
    expected_prob_cheat,
    fairness_curve,
    scaling_fit,
)
from qcsign.analysis.oracle import ORACLE_RTOL, oracle_suite
from qcsign.cli import main
from qcsign.protocol import (
    BindingClaim,
    CheaterFlag,
    Exchange,
    Party,
    Strategy,
    Verdict,
    binding_verdict,
    init_session,
    make_session,
    wire,
)
from qcsign.quantum import DESCRIPTORS, Basis, NoiseModel
from qcsign.simulation import estimate_detection_curve, run_trials, validate_against_analysis

UNIFORM = AlphaDistribution.uniform(0.9, 0.99)


@pytest.fixture
def report(capsys):
    def emit(number: int, ok: bool, detail: str):
        with capsys.disabled():
            print(f"\nACCEPTANCE {number}: {'PASS' if ok else 'FAIL'} | {detail}")
        return ok
    return emit


def test_criterion_1_headline_sup(tmp_path, report):
    assert main(["analyze", "--n", "600", "--split", "binomial", "--alpha-lo", "0.9",
                 "--alpha-hi", "0.99", "--out", str(tmp_path)]) == 0
    summary = json.loads((tmp_path / "summary.json").read_text())
    m_star, sup = summary["m_star"], summary["sup"]
    ok = abs(m_star - 92) <= 5 and abs(sup - 0.0811) <= 0.005
    assert report(1, ok, f"N=600 binomial: m*={m_star} (92+-5), sup={sup:.6f} (0.0811+-0.005)")


@pytest.mark.slow
def test_criterion_2_fixed_split_large_n(report):
    m_star, sup = fairness_curve(8000, UNIFORM, SplitModel.FIXED_EQUAL).sup
    ok = abs(m_star - 1455) <= 15 and abs(sup - 0.0247) <= 0.005
    assert report(2, ok, f"N=8000 fixed: m*={m_star} (1455+-15), sup={sup:.6f} (0.0247+-0.005)")


def test_criterion_3_scaling_slope(report):
    ns = (100, 200, 400, 800, 1600)
    points = [(n, fairness_curve(n, UNIFORM, SplitModel.FIXED_EQUAL).sup[1]) for n in ns]
    fit = scaling_fit(points)
    ok = -0.6 <= fit.slope <= -0.4
    assert report(3, ok, f"fixed split over N={list(ns)}: slope={fit.slope:.4f} in [-0.6, -0.4]")


def test_criterion_4_detection_law(report):
    # A single 12-point curve is judged with a family-wise 95% band; that check
    # has a 5% false-alarm rate by construction, so it is replicated over a
    # fixed block of seeds and the number of failing curves must agree with it.
    trials, seeds = 100_000, range(20)
    curves = [estimate_detection_curve(Strategy.always_reject(), 12, trials, seed=s) for s in seeds]
    failing = [c.seed for c in curves if not c.passed()]
    allowed = int(stats.binom.ppf(0.999, len(curves), 0.05))
    first = curves[0].rows[0]
    lo, hi = first.estimate.ci
    pointwise = sum(r.within_ci() for r in curves[0].rows)
    ok = len(failing) <= allowed and lo <= 0.25 <= hi
    assert report(4, ok,
                  f"1e5 trials x {len(curves)} seeds: family-wise band failed for seeds {failing} "
                  f"(allowed {allowed}); seed 0 dm=1 {first.estimate.value:.4f} CI [{lo:.4f}, {hi:.4f}], "
                  f"pointwise 95% hits {pointwise}/12")


def test_criterion_5_oracle(report):
    checked, worst, failures = oracle_suite(12, (0.55, 0.7, 0.9), ORACLE_RTOL)
    ok = not failures
    assert report(5, ok, f"{checked} cases N<=12: {len(failures)} beyond {ORACLE_RTOL:g}, "
                         f"worst relative error {worst:.2e}")


def _swap(c: BindingClaim) -> BindingClaim:
    return BindingClaim(c.party.other, c.bases, c.outcomes)


def test_criterion_6_protocol_invariants(report):
    details, ok = [], True
    for N in (2, 20, 200):
        r = run_trials(N, Strategy.honest(), Strategy.honest(), trials=10_000, seed=N)
        good = r.valid == r.trials and r.aborted == 0
        ok &= good
        details.append(f"N={N} P_valid={r.p_valid.value:g}")
    exhaustive = 0
    for N in range(1, 5):
        for a_idx in itertools.product(range(4), repeat=N):
            for b_idx in itertools.product(range(4), repeat=N):
                s = make_session(1, [DESCRIPTORS[i] for i in a_idx], [DESCRIPTORS[i] for i in b_idx])
                ex = Exchange(s, Strategy.honest(), Strategy.honest(),
                              rng=np.random.default_rng([N, *a_idx, *b_idx]))
                good = not ex.run().aborted
                ca, cb = ex.claims()
                good &= binding_verdict(s, ca, cb, 0.75).contract_valid
                ok &= good
                exhaustive += 1
    rng = np.random.default_rng(6)
    pool = ["honest", "always-reject", "guesser@refuse", "mixed-reject:1,2@bind", "rotated:1.0@refuse"]
    swaps = 500
    for _ in range(swaps):
        N = int(rng.integers(2, 40))
        s = init_session(N, rng)
        sa, sb = (Strategy.parse(pool[i]) for i in rng.integers(0, len(pool), 2))
        ex = Exchange(s, sa, sb, NoiseModel(0.05, 0.1), rng)
        ex.run()
        ca, cb = ex.claims(rng=rng)
        alpha = float(rng.uniform(0.51, 0.99))
        v = binding_verdict(s, ca, cb, alpha, 0.1)
        ok &= binding_verdict(s.swapped(), _swap(cb), _swap(ca), alpha, 0.1) == v.swapped()
    details.append(f"exhaustive N<=4 sessions={exhaustive}")
    details.append(f"role swap on {swaps} random sessions")
    assert report(6, ok, ", ".join(details))


def test_criterion_7_chebyshev(report):
    p_ch = expected_prob_cheat(92, 600, UNIFORM, SplitModel.BINOMIAL)
    delta = p_ch ** (1 / 3)
    risk = chebyshev_risk_check(600, 92, delta, UNIFORM, SplitModel.BINOMIAL)
    ok = risk.passed
    assert report(7, ok, f"N=600 m=92: P_ch={p_ch:.6f}, delta={delta:.4f}, "
                         f"Prob[Y<{risk.threshold:.4f}]={risk.probability:.4f} >= {risk.bound:.4f}")


def test_criterion_8_cross_validation(report):
    table = validate_against_analysis(trials=100_000, seed=8)
    ok = table.pass_fraction >= 0.95
    worst = max(abs(c.z) for c in table.cells)
    assert report(8, ok, f"{len(table.cells)} cells at 1e5 trials: {table.pass_fraction:.1%} "
                         f"within 4 sigma (need 95%), max |z|={worst:.2f}")


def _random_claim(rng, party, n):
    return BindingClaim(party, tuple(Basis(int(b)) for b in rng.integers(0, 2, n)),
                        tuple(int(x) for x in rng.integers(0, 2, n)))


def _random_message(rng):
    sid = int(rng.integers(0, 2 ** 63)) * 2 + int(rng.integers(0, 2))
    party = Party(int(rng.integers(0, 2)))
    n = int(rng.integers(0, 64))
    descs = lambda: tuple(DESCRIPTORS[i] for i in rng.integers(0, 4, n))
    u32 = lambda: int(rng.integers(0, 2 ** 32))
    kind = int(rng.integers(0, 6))
    if kind == 0:
        return wire.InitRequest(sid, party, u32(), u32())
    if kind == 1:
        return wire.InitGrant(sid, party, u32(), descs(), descs())
    if kind == 2:
        return wire.OutcomeReport(sid, party, u32(), int(rng.integers(0, 2)))
    if kind == 3:
        return wire.BindRequest(sid, party)
    if kind == 4:
        return wire.BindClaim(sid, _random_claim(rng, party, n))
    verdict = Verdict(bool(rng.integers(0, 2)), CheaterFlag(int(rng.integers(0, 4))),
                      float(rng.uniform(0.5, 1.0)), tuple(u32() for _ in range(4)))
    return wire.VerdictNotice(sid, verdict)


def test_criterion_9_round_trips_and_offline_binding(tmp_path, report):
    rng = np.random.default_rng(9)
    count = 10_000
    msg_ok = all(wire.decode_message(wire.encode_message(m)) == m
                 for m in (_random_message(rng) for _ in range(count)))
    sessions_ok = True
    for i in range(count):
        s = init_session(int(rng.integers(1, 80)), rng, session_id=int(rng.integers(0, 2 ** 63)))
        sessions_ok &= wire.decode_session(wire.encode_session(s)) == s
    path = tmp_path / "one.bin"
    s = init_session(33, rng, session_id=7)
    wire.save_session(path, s)
    sessions_ok &= wire.load_session(path) == s

    persist = tmp_path / "trial0"
    assert main(["simulate", "--n", "24", "--trials", "1", "--seed", "9",
                 "--strategy-b", "guesser@refuse", "--persist", str(persist),
                 "--out", str(tmp_path / "sim")]) == 0
    alpha = json.loads((persist / "alpha.json").read_text())["alpha"]
    proc = subprocess.run(
        [sys.executable, "-m", "qcsign", "bind", "--session", str(persist / "session.bin"),
         "--claim-a", str(persist / "claim_a.bin"), "--claim-b", str(persist / "claim_b.bin"),
         "--alpha-point", repr(alpha), "--out", str(tmp_path / "bind")],
        capture_output=True, text=True, timeout=120)
    bind_ok = (proc.returncode == 0 and
               (tmp_path / "bind" / "verdict.bin").read_bytes() == (persist / "verdict.bin").read_bytes())
    ok = msg_ok and sessions_ok and bind_ok
    assert report(9, ok, f"{count} messages identity={msg_ok}, {count} sessions identity={sessions_ok}, "
                         f"fresh-process bind bit-identical={bind_ok}")
