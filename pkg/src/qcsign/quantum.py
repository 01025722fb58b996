"""Classical simulation of the four BB84-style qubit states and their measurement.

States are pure, so each one is a unit-norm complex 2-vector. The Accept
basis is {|0>, |1>} and the Reject basis is {|->, |+>} with
|+-> = (|1> +- |0>)/sqrt(2). A prepared state is recorded by Trent as two
classical bits ``(basis_bit, state_bit)``: ``basis_bit = 1`` for the Accept
basis, ``state_bit = 1`` for |1> or |+>.
"""

from __future__ import annotations

import enum
import functools
import math
from dataclasses import dataclass

import numpy as np

SQRT_HALF = 1.0 / math.sqrt(2.0)


class Basis(enum.Enum):
    ACCEPT = 1
    REJECT = 0

    @property
    def bit(self) -> int:
        return self.value

    @classmethod
    def from_bit(cls, bit: int) -> "Basis":
        return cls.ACCEPT if bit else cls.REJECT


@dataclass(frozen=True)
class QubitDescriptor:
    """Trent's record ``C = (C_b, C_s)`` of one prepared qubit."""

    basis_bit: int
    state_bit: int

    def __post_init__(self):
        if self.basis_bit not in (0, 1) or self.state_bit not in (0, 1):
            raise ValueError(f"descriptor bits must be 0/1, got {self!r}")

    @property
    def basis(self) -> Basis:
        return Basis.from_bit(self.basis_bit)

    @property
    def label(self) -> str:
        return _LABELS[(self.basis_bit, self.state_bit)]

    def amplitudes(self) -> np.ndarray:
        return _AMPLITUDES[(self.basis_bit, self.state_bit)].copy()


_LABELS = {(1, 0): "|0>", (1, 1): "|1>", (0, 0): "|->", (0, 1): "|+>"}
_AMPLITUDES = {
    (1, 0): np.array([1.0, 0.0], dtype=complex),
    (1, 1): np.array([0.0, 1.0], dtype=complex),
    (0, 0): np.array([-SQRT_HALF, SQRT_HALF], dtype=complex),
    (0, 1): np.array([SQRT_HALF, SQRT_HALF], dtype=complex),
}

# Interned descriptors indexed by 2*basis_bit + state_bit.
DESCRIPTORS = tuple(QubitDescriptor(b, s) for b in (0, 1) for s in (0, 1))


class ObservableKind(enum.Enum):
    ACCEPT = "accept"
    REJECT = "reject"
    ROTATED = "rotated"


@dataclass(frozen=True)
class Observable:
    """A two-outcome projective measurement.

    For ``ROTATED`` the outcome-0 eigenvector is
    ``cos(theta/2)|0> + exp(i phi) sin(theta/2)|1>``; outcome 1 is its
    orthogonal complement. ``Rotated(0, 0)`` therefore labels outcomes the
    same way as the Accept observable.
    """

    kind: ObservableKind
    theta: float = 0.0
    phi: float = 0.0

    def __post_init__(self):
        if self.kind is ObservableKind.ROTATED:
            if not 0.0 <= self.theta <= math.pi:
                raise ValueError(f"theta must lie in [0, pi], got {self.theta}")
            if not 0.0 <= self.phi < 2.0 * math.pi:
                raise ValueError(f"phi must lie in [0, 2pi), got {self.phi}")

    @classmethod
    def accept(cls) -> "Observable":
        return ACCEPT_OBS

    @classmethod
    def reject(cls) -> "Observable":
        return REJECT_OBS

    @classmethod
    def rotated(cls, theta: float, phi: float = 0.0) -> "Observable":
        return cls(ObservableKind.ROTATED, float(theta), float(phi))

    @classmethod
    def for_basis(cls, basis: Basis) -> "Observable":
        return ACCEPT_OBS if basis is Basis.ACCEPT else REJECT_OBS

    def eigenvectors(self) -> tuple[np.ndarray, np.ndarray]:
        """(outcome-0 eigenvector, outcome-1 eigenvector)."""
        if self.kind is ObservableKind.ACCEPT:
            return _AMPLITUDES[(1, 0)], _AMPLITUDES[(1, 1)]
        if self.kind is ObservableKind.REJECT:
            return _AMPLITUDES[(0, 0)], _AMPLITUDES[(0, 1)]
        c, s = math.cos(self.theta / 2.0), math.sin(self.theta / 2.0)
        phase = complex(math.cos(self.phi), math.sin(self.phi))
        m = np.array([c, phase * s], dtype=complex)
        m_perp = np.array([-phase.conjugate() * s, c], dtype=complex)
        return m, m_perp


ACCEPT_OBS = Observable(ObservableKind.ACCEPT)
REJECT_OBS = Observable(ObservableKind.REJECT)


@dataclass(frozen=True)
class OutcomeDistribution:
    p0: float
    p1: float

    def __post_init__(self):
        if abs(self.p0 + self.p1 - 1.0) > 1e-12:
            raise ValueError(f"outcome probabilities do not sum to 1: {self}")


@dataclass(frozen=True)
class NoiseModel:
    """Outcome-flip channel plus the error tolerance used to detect cheating.

    ``flip_prob`` folds channel corruption and detector error into one
    probability of inverting a reported outcome. ``eta`` is the tolerated
    ratio of wrong results.
    """

    flip_prob: float = 0.0
    eta: float = 0.0

    def __post_init__(self):
        if not 0.0 <= self.flip_prob <= 1.0:
            raise ValueError(f"flip_prob must lie in [0, 1], got {self.flip_prob}")
        if not 0.0 <= self.eta < 1.0:
            raise ValueError(f"eta must lie in [0, 1), got {self.eta}")


NOISELESS = NoiseModel()


class EmptySequenceError(ValueError):
    pass


def prepare_sequence(n: int, rng: np.random.Generator) -> list[QubitDescriptor]:
    """Draw ``n`` descriptors i.i.d. uniform over the four states."""
    if n < 1:
        raise EmptySequenceError(f"cannot prepare {n} qubits")
    idx = rng.integers(0, 4, size=n)
    return [DESCRIPTORS[i] for i in idx.tolist()]


@functools.lru_cache(maxsize=4096)
def outcome_distribution(state: QubitDescriptor, obs: Observable) -> OutcomeDistribution:
    psi = _AMPLITUDES[(state.basis_bit, state.state_bit)]
    e0, e1 = obs.eigenvectors()
    p0 = abs(np.vdot(e0, psi)) ** 2
    p1 = abs(np.vdot(e1, psi)) ** 2
    # Exact values for the textbook cases keep the unbiased-basis 1/2 exact.
    p0, p1 = _clean(p0), _clean(p1)
    total = p0 + p1
    return OutcomeDistribution(p0 / total, p1 / total)


def _clean(p: float) -> float:
    for exact in (0.0, 0.5, 1.0):
        if abs(p - exact) < 1e-15:
            return exact
    return float(p)


def measure(state: QubitDescriptor, obs: Observable, noise: NoiseModel,
            rng: np.random.Generator) -> int:
    """Sample an outcome by the Born rule, then flip it with ``noise.flip_prob``."""
    dist = outcome_distribution(state, obs)
    bit = 1 if rng.random() < dist.p1 else 0
    if noise.flip_prob > 0.0 and rng.random() < noise.flip_prob:
        bit ^= 1
    return bit


def wrong_probability_on_accept(theta: float) -> float:
    """Probability that a rotated measurement contradicts an Accept-basis state."""
    return math.sin(theta / 2.0) ** 2
