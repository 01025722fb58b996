import json
import math

import numpy as np
import pytest

from qcsign.analysis import AlphaDistribution, SplitModel, prob_reject_avg
from qcsign.protocol import Strategy, init_session, run_exchange
from qcsign.quantum import NOISELESS, NoiseModel
from qcsign.simulation import (
    Estimate,
    clopper_pearson,
    default_grid,
    estimate_detection_curve,
    expected_detection,
    run_single,
    run_trials,
    sample_exchange_aborts,
    validate_against_analysis,
)

POINT75 = AlphaDistribution.point(0.75)


def within_4sigma(k, n, p):
    if p in (0.0, 1.0):
        return k == n * p
    return abs(k / n - p) <= 4 * math.sqrt(p * (1 - p) / n)


def test_clopper_pearson_edges():
    lo, hi = clopper_pearson(0, 10)
    assert lo == 0.0 and hi == pytest.approx(1 - 0.025 ** 0.1)
    lo, hi = clopper_pearson(10, 10)
    assert hi == 1.0 and lo == pytest.approx(0.025 ** 0.1)
    lo, hi = clopper_pearson(50, 100)
    assert lo < 0.5 < hi
    with pytest.raises(ValueError):
        clopper_pearson(0, 0)


def test_honest_pair_always_valid():
    r = run_trials(12, Strategy.honest(), Strategy.honest(), trials=500, seed=1)
    assert r.valid == 500 and r.aborted == 0
    assert r.p_valid.value == 1.0 and r.p_valid.ci[1] == 1.0


def test_trials_are_deterministic_and_order_free():
    args = (10, Strategy.honest(), Strategy.guesser(intent=Strategy.parse("honest@refuse").intent))
    a = run_trials(*args, trials=200, seed=9)
    b = run_trials(*args, trials=200, seed=9)
    assert a.to_json() == b.to_json() and a.to_csv() == b.to_csv()
    # Re-running single trials in reverse order reproduces the aggregate.
    valid = sum(run_single(*args, NOISELESS, AlphaDistribution.uniform(), 9, t).verdict.contract_valid
                for t in reversed(range(200)))
    assert valid == a.valid


def test_refuser_who_never_measures_accept_always_rejects():
    r = run_trials(20, Strategy.honest(), Strategy.always_reject(), alpha_dist=POINT75,
                   trials=2000, seed=2)
    # Bob measured no qubit with the Accept observable, so P_R = 1 and no contract.
    assert prob_reject_avg(0, 0.75, 20, SplitModel.BINOMIAL).prob == pytest.approx(1.0)
    assert r.valid == 0
    assert sum(r.detection_steps.values()) == r.aborted


def test_halted_refuser_matches_analysis_fold():
    # Bob reports 5 Accept outcomes and then stops; Alice binds.
    N, k, trials = 20, 5, 4000
    r = run_trials(N, Strategy.honest(), Strategy.parse(f"honest@refuse#{k}"), alpha_dist=POINT75,
                   trials=trials, seed=3)
    assert r.abort_reasons["timeout"] == trials and set(r.detection_steps) == {k + 1}
    p_bob = prob_reject_avg(k, 0.75, N, SplitModel.BINOMIAL).prob
    p_alice = prob_reject_avg(k + 1, 0.75, N, SplitModel.BINOMIAL).prob
    assert within_4sigma(r.valid, trials, 1 - p_bob)
    assert within_4sigma(r.bind_a, trials, 1 - p_bob)
    assert within_4sigma(r.bind_b, trials, 1 - p_alice)


def test_single_reject_round_detected_with_quarter_probability():
    trials = 4000
    r = run_trials(10, Strategy.honest(), Strategy.mixed_reject({1}), trials=trials, seed=4)
    assert set(r.detection_steps) <= {1}
    assert within_4sigma(r.detection_steps[1], trials, 0.25)
    lo, hi = Estimate(r.detection_steps[1], trials).ci
    assert lo <= 0.25 <= hi


@pytest.mark.parametrize("strategy", ["always-reject", "guesser", "rotated:1.0", "mixed-reject:2,4"])
def test_vectorised_sampler_agrees_with_protocol(strategy):
    N, trials = 8, 3000
    strat = Strategy.parse(strategy)
    noise = NoiseModel(flip_prob=0.03, eta=0.0)
    fast, _ = sample_exchange_aborts(N, Strategy.honest(), strat, noise, trials, np.random.default_rng(5))
    slow = []
    for t in range(trials):
        r = np.random.default_rng([6, t])
        slow.append(run_exchange(init_session(N, r), Strategy.honest(), strat, noise, r).abort_step or 0)
    slow = np.array(slow)
    for k in (1, 2, 4, 8):
        p_fast = np.mean((fast > 0) & (fast <= k))
        p_slow = np.mean((slow > 0) & (slow <= k))
        pooled = 0.5 * (p_fast + p_slow)
        sigma = math.sqrt(max(pooled * (1 - pooled), 1e-12) * 2 / trials)
        assert abs(p_fast - p_slow) <= 4 * sigma


def test_detection_curve_always_reject():
    curve = estimate_detection_curve(Strategy.always_reject(), 12, 20_000, seed=11)
    assert [r.delta_m for r in curve.rows] == list(range(1, 13))
    assert curve.rows[8].exact == pytest.approx(1 - 0.75 ** 9)
    assert curve.passed()
    assert curve.to_csv().splitlines()[0].startswith("delta_m,round,empirical,exact")


def test_detection_curve_guesser_uses_same_law():
    curve = estimate_detection_curve(Strategy.guesser(), 6, 20_000, seed=12)
    assert curve.passed()


def test_rotated_zero_is_never_detected():
    curve = estimate_detection_curve(Strategy.rotated(0.0), 10, 5000, seed=13)
    assert len(curve.rows) == 10 and all(r.detected == 0 for r in curve.rows)
    assert all(r.exact == 0.0 for r in curve.rows)


def test_rotated_half_pi_behaves_like_reject():
    curve = estimate_detection_curve(Strategy.rotated(math.pi / 2), 10, 20_000, seed=14)
    for r in curve.rows:
        assert r.exact == pytest.approx(1 - 0.75 ** r.delta_m, abs=1e-12)
    assert curve.passed()


def test_rotated_exact_law_and_approximation_differ():
    s = Strategy.rotated(math.pi / 3)
    exact, approx = expected_detection(s, 6)
    q = 0.5
    assert exact == pytest.approx(1 - ((3 + q) / 4) ** 6)
    assert approx != pytest.approx(exact)
    curve = estimate_detection_curve(s, 8, 20_000, seed=15)
    assert curve.passed()


def test_detection_curve_only_counts_rounds_in_the_set():
    curve = estimate_detection_curve(Strategy.mixed_reject({3, 7}), 8, 5000, seed=16)
    assert [(r.delta_m, r.round) for r in curve.rows] == [(1, 3), (2, 7)]
    doc = curve.to_json()
    assert doc["config"]["strategy"].startswith("mixed-reject")


def test_validation_examples():
    table = validate_against_analysis([(2, 1, 0.9), (7, 0, 0.6), (30, 15, 0.75)], trials=20_000, seed=17)
    cells = table.cells
    assert cells[0].expected == pytest.approx(0.75)
    assert abs(cells[0].empirical - 0.75) < 0.02
    assert cells[1].empirical == 1.0 and cells[1].z == 0.0
    assert table.passed() and table.pass_fraction == 1.0
    assert table.to_csv().splitlines()[0] == "N,m,alpha,trials,empirical,expected,sigma,z,passed"
    json.dumps(table.to_json())


def test_validation_rejects_bad_cells():
    with pytest.raises(ValueError):
        validate_against_analysis([(5, 6, 0.9)], trials=10)


def test_default_grid_shape():
    grid = default_grid()
    assert all(N <= 100 and 0 <= m <= N for N, m, _ in grid)
    assert {a for _, _, a in grid} == {0.6, 0.75, 0.9}
    assert len(grid) == len(set(grid))


def test_noisy_honest_pair_stays_valid():
    noise = NoiseModel(flip_prob=0.02, eta=0.04)
    r = run_trials(200, Strategy.honest(), Strategy.honest(), noise, AlphaDistribution.point(0.9),
                   trials=300, seed=18)
    assert r.p_valid.value >= 0.99


def test_report_exports():
    r = run_trials(15, Strategy.honest(), Strategy.always_reject(), trials=300, seed=19)
    doc = r.to_json()
    assert doc["config"]["strategy_b"] == "always-reject@refuse"
    assert sum(doc["detection_histogram"].values()) == r.aborted
    assert 0.0 <= doc["p_bind_b"]["value"] <= 1.0
    lines = r.to_csv().splitlines()
    assert lines[0].startswith("quantity,") and lines[1].startswith("p_valid,")


def test_run_trials_validates():
    with pytest.raises(ValueError):
        run_trials(5, Strategy.honest(), Strategy.mixed_reject({9}), trials=1)
    with pytest.raises(ValueError):
        run_trials(5, Strategy.honest(), Strategy.honest(), trials=0)
