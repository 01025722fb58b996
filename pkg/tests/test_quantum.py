import math

import numpy as np
import pytest
from hypothesis import given
from hypothesis import strategies as st

from qcsign.quantum import (
    ACCEPT_OBS,
    DESCRIPTORS,
    NOISELESS,
    REJECT_OBS,
    Basis,
    EmptySequenceError,
    NoiseModel,
    Observable,
    OutcomeDistribution,
    QubitDescriptor,
    measure,
    outcome_distribution,
    prepare_sequence,
    wrong_probability_on_accept,
)

ZERO, ONE = QubitDescriptor(1, 0), QubitDescriptor(1, 1)
MINUS, PLUS = QubitDescriptor(0, 0), QubitDescriptor(0, 1)

observables = st.one_of(
    st.just(ACCEPT_OBS),
    st.just(REJECT_OBS),
    st.builds(Observable.rotated, st.floats(0, math.pi), st.floats(0, 2 * math.pi, exclude_max=True)),
)


def test_descriptor_labels_follow_assignment():
    assert [d.label for d in DESCRIPTORS] == ["|->", "|+>", "|0>", "|1>"]
    assert ZERO.basis is Basis.ACCEPT and PLUS.basis is Basis.REJECT


def test_descriptor_rejects_non_bits():
    with pytest.raises(ValueError):
        QubitDescriptor(2, 0)


def test_prepare_sequence_is_seeded():
    a = prepare_sequence(4, np.random.default_rng(11))
    b = prepare_sequence(4, np.random.default_rng(11))
    assert a == b and len(a) == 4


def test_prepare_single_and_empty():
    (d,) = prepare_sequence(1, np.random.default_rng(0))
    assert d in DESCRIPTORS
    with pytest.raises(EmptySequenceError):
        prepare_sequence(0, np.random.default_rng(0))


def test_prepare_frequencies_are_uniform():
    seq = prepare_sequence(100_000, np.random.default_rng(5))
    counts = {d: 0 for d in DESCRIPTORS}
    for d in seq:
        counts[d] += 1
    for c in counts.values():
        assert abs(c / 100_000 - 0.25) < 0.01


def test_outcome_examples():
    assert outcome_distribution(ZERO, ACCEPT_OBS).p0 == 1.0
    d = outcome_distribution(PLUS, ACCEPT_OBS)
    assert d.p0 == 0.5 and d.p1 == 0.5
    r = outcome_distribution(ZERO, Observable.rotated(math.pi / 3, 0.0))
    assert r.p0 == pytest.approx(0.75, abs=1e-15)


@pytest.mark.parametrize("state", DESCRIPTORS)
def test_matched_basis_is_deterministic(state):
    obs = Observable.for_basis(state.basis)
    d = outcome_distribution(state, obs)
    assert (d.p0, d.p1) == ((0.0, 1.0) if state.state_bit else (1.0, 0.0))


@pytest.mark.parametrize("state", DESCRIPTORS)
def test_crossed_basis_is_exactly_unbiased(state):
    other = Basis.REJECT if state.basis is Basis.ACCEPT else Basis.ACCEPT
    d = outcome_distribution(state, Observable.for_basis(other))
    assert d.p0 == 0.5 and d.p1 == 0.5


@given(st.sampled_from(DESCRIPTORS), observables)
def test_probabilities_sum_to_one(state, obs):
    d = outcome_distribution(state, obs)
    assert 0.0 <= d.p0 <= 1.0 and abs(d.p0 + d.p1 - 1.0) <= 1e-12


@pytest.mark.parametrize("state", DESCRIPTORS)
def test_rotated_zero_matches_accept(state):
    assert outcome_distribution(state, Observable.rotated(0.0, 0.0)) == outcome_distribution(state, ACCEPT_OBS)


@given(st.floats(0, math.pi))
def test_rotated_wrong_probability_on_accept_states(theta):
    obs = Observable.rotated(theta)
    assert outcome_distribution(ZERO, obs).p1 == pytest.approx(wrong_probability_on_accept(theta), abs=1e-12)
    assert outcome_distribution(ONE, obs).p0 == pytest.approx(wrong_probability_on_accept(theta), abs=1e-12)


def test_observable_range_checks():
    with pytest.raises(ValueError):
        Observable.rotated(-0.1)
    with pytest.raises(ValueError):
        Observable.rotated(1.0, 2 * math.pi)


def test_outcome_distribution_checks_normalisation():
    with pytest.raises(ValueError):
        OutcomeDistribution(0.5, 0.6)


def test_noise_model_ranges():
    with pytest.raises(ValueError):
        NoiseModel(flip_prob=1.5)
    with pytest.raises(ValueError):
        NoiseModel(eta=1.0)


def test_measure_examples():
    rng = np.random.default_rng(3)
    assert all(measure(ONE, ACCEPT_OBS, NOISELESS, rng) == 1 for _ in range(100))
    flip = NoiseModel(flip_prob=1.0)
    assert all(measure(ONE, ACCEPT_OBS, flip, rng) == 0 for _ in range(100))


def test_measure_frequency_within_four_sigma():
    rng = np.random.default_rng(8)
    n = 100_000
    mean = sum(measure(MINUS, ACCEPT_OBS, NOISELESS, rng) for _ in range(n)) / n
    assert abs(mean - 0.5) < 0.01
    assert abs(mean - 0.5) <= 4 * math.sqrt(0.25 / n)


def test_measure_is_seeded():
    a = [measure(PLUS, ACCEPT_OBS, NOISELESS, np.random.default_rng(1)) for _ in range(3)]
    b = [measure(PLUS, ACCEPT_OBS, NOISELESS, np.random.default_rng(1)) for _ in range(3)]
    assert a == b
