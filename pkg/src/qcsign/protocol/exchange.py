"""Exchange phase: clients alternately report measurement outcomes.

Alice reports first in every round. Each client checks the opponent's
reports against its cross bits, counting a mismatch whenever the opponent's
qubit lies in the Accept basis and the reported bit differs from ``C_s``.
The client aborts once mismatches exceed the running budget ``floor(eta*m)``.
"""

from __future__ import annotations

import enum
import math
from dataclasses import dataclass

import numpy as np

from qcsign.protocol import wire
from qcsign.protocol.binding import BindingClaim
from qcsign.protocol.session import Party, SessionRecord
from qcsign.protocol.strategy import Intent, Strategy
from qcsign.quantum import NOISELESS, Observable, NoiseModel, QubitDescriptor, measure


class ProtocolError(RuntimeError):
    pass


class TransportError(RuntimeError):
    pass


class AbortReason(enum.Enum):
    NONE = "none"
    MISMATCH_DETECTED = "mismatch_detected"
    TIMEOUT = "timeout"
    TRANSPORT_FAILURE = "transport_failure"


@dataclass(frozen=True)
class Round:
    party: Party
    m: int
    bit: int


@dataclass(frozen=True)
class ExchangeTranscript:
    N: int
    rounds: tuple[Round, ...]
    abort_step: int | None = None
    abort_reason: AbortReason = AbortReason.NONE
    detected_by: Party | None = None

    @property
    def aborted(self) -> bool:
        return self.abort_reason is not AbortReason.NONE

    def check(self) -> None:
        """Assert alternation (Alice first) and per-party index monotonicity."""
        for i, r in enumerate(self.rounds):
            if r.party is not Party(i % 2) or r.m != i // 2 + 1:
                raise ProtocolError(f"round {i} out of order: {r}")
        if self.abort_step is not None and not 1 <= self.abort_step <= self.N:
            raise ProtocolError(f"abort step {self.abort_step} outside 1..{self.N}")


class Client:
    """One client's view of the Exchange: its qubits, cross bits and strategy."""

    def __init__(self, party: Party, qubits, cross_bits, strategy: Strategy,
                 noise: NoiseModel, rng: np.random.Generator):
        self.party = party
        self.qubits: tuple[QubitDescriptor, ...] = tuple(qubits)
        self.cross_bits: tuple[QubitDescriptor, ...] = tuple(cross_bits)
        self.strategy = strategy
        self.noise = noise
        self.rng = rng
        self.N = len(self.qubits)
        strategy.validate(self.N)
        self.outcomes: list[int | None] = [None] * self.N
        self.observables: list[Observable | None] = [None] * self.N
        self.sent = 0
        self.seen = 0
        self.mismatches = 0

    def report(self) -> int:
        """Produce the outcome for the next round; guessed qubits stay unmeasured."""
        m = self.sent + 1
        if m > self.N:
            raise ProtocolError(f"{self.party.name} has no round {m}")
        obs = self.strategy.observable(m)
        if obs is None:
            bit = int(self.rng.integers(0, 2))
        else:
            bit = measure(self.qubits[m - 1], obs, self.noise, self.rng)
            self.outcomes[m - 1] = bit
            self.observables[m - 1] = obs
        self.sent = m
        return bit

    def observe(self, m: int, bit: int) -> bool:
        """Check the opponent's round-``m`` report; True means abort."""
        if m != self.seen + 1:
            raise ProtocolError(f"{self.party.name} expected round {self.seen + 1}, got {m}")
        self.seen = m
        ref = self.cross_bits[m - 1]
        if ref.basis_bit == 1 and bit != ref.state_bit:
            self.mismatches += 1
        return self.mismatches > math.floor(self.noise.eta * m)

    def finish(self, intent: Intent | None = None, rng: np.random.Generator | None = None) -> BindingClaim:
        """Binding claim after the exchange stops.

        Unmeasured qubits are measured in the intent basis, and every qubit is
        claimed in that basis. The client state is left untouched so the two
        completion scenarios can be drawn from the same exchange.
        """
        intent = self.strategy.intent if intent is None else intent
        rng = self.rng if rng is None else rng
        obs = Observable.for_basis(intent.basis)
        outcomes = [o if o is not None else measure(q, obs, self.noise, rng)
                    for q, o in zip(self.qubits, self.outcomes)]
        return BindingClaim.uniform(self.party, intent.basis, outcomes)


class DirectLink:
    """Delivers reports unchanged."""

    def deliver(self, session_id: int, party: Party, m: int, bit: int) -> tuple[int, int]:
        return m, bit

    def close(self) -> None:
        pass


class MemoryLink(DirectLink):
    """In-memory channel that pushes every report through the wire codec.

    ``fail_at`` holds ``(party, m)`` pairs whose delivery raises
    ``TransportError``, to exercise failure handling.
    """

    def __init__(self, fail_at=()):
        self.fail_at = {(Party(p), int(m)) for p, m in fail_at}
        self.frames: list[bytes] = []

    def deliver(self, session_id, party, m, bit):
        if (party, m) in self.fail_at:
            raise TransportError(f"link dropped {party.name} round {m}")
        data = wire.encode_message(wire.OutcomeReport(session_id, party, m, bit))
        self.frames.append(data)
        msg = wire.decode_message(data)
        if msg.session_id != session_id or msg.party is not party:
            raise ProtocolError("report delivered on the wrong session")
        return msg.m, msg.bit


class Exchange:
    """Drives both clients through the alternating rounds of one session."""

    def __init__(self, session: SessionRecord, strat_a: Strategy, strat_b: Strategy,
                 noise: NoiseModel = NOISELESS, rng: np.random.Generator | None = None,
                 link: DirectLink | None = None):
        rng = np.random.default_rng() if rng is None else rng
        rng_a, rng_b = rng.spawn(2)
        self.session = session
        self.link = DirectLink() if link is None else link
        self.clients = (
            Client(Party.ALICE, session.alice_qubits, session.alice_cross_bits, strat_a, noise, rng_a),
            Client(Party.BOB, session.bob_qubits, session.bob_cross_bits, strat_b, noise, rng_b),
        )

    def client(self, party: Party) -> Client:
        return self.clients[party]

    def run(self) -> ExchangeTranscript:
        session = self.session
        rounds: list[Round] = []

        def stop(m, reason, by=None):
            return ExchangeTranscript(session.N, tuple(rounds), m, reason, by)

        for m in range(1, session.N + 1):
            for party in (Party.ALICE, Party.BOB):
                sender, receiver = self.clients[party], self.clients[party.other]
                if m > session.deadline or not sender.strategy.sends(m):
                    return stop(m, AbortReason.TIMEOUT)
                bit = sender.report()
                try:
                    got_m, got_bit = self.link.deliver(session.session_id, party, m, bit)
                except TimeoutError:
                    return stop(m, AbortReason.TIMEOUT)
                except (TransportError, OSError, wire.DecodeError):
                    return stop(m, AbortReason.TRANSPORT_FAILURE)
                rounds.append(Round(party, got_m, got_bit))
                if receiver.observe(got_m, got_bit):
                    return stop(m, AbortReason.MISMATCH_DETECTED, receiver.party)
        return stop(None, AbortReason.NONE)

    def claims(self, intent_a: Intent | None = None, intent_b: Intent | None = None,
               rng: np.random.Generator | None = None) -> tuple[BindingClaim, BindingClaim]:
        rngs = (None, None) if rng is None else rng.spawn(2)
        a, b = self.clients
        return a.finish(intent_a, rngs[0]), b.finish(intent_b, rngs[1])


def run_exchange(session: SessionRecord, strat_a: Strategy, strat_b: Strategy,
                 noise: NoiseModel = NOISELESS, rng: np.random.Generator | None = None,
                 link: DirectLink | None = None) -> ExchangeTranscript:
    return Exchange(session, strat_a, strat_b, noise, rng, link).run()
