"""Trent's preparation ledger and the Initialization phase."""

from __future__ import annotations

import enum
import itertools
import threading
from dataclasses import dataclass

import numpy as np

from qcsign.quantum import QubitDescriptor, prepare_sequence


class Party(enum.IntEnum):
    ALICE = 0
    BOB = 1

    @property
    def other(self) -> "Party":
        return Party.BOB if self is Party.ALICE else Party.ALICE


@dataclass(frozen=True)
class SessionRecord:
    """Everything Trent prepared for one contract.

    ``alice_cross_bits`` are the descriptors of Bob's qubits handed to Alice
    and vice versa. ``deadline`` is the round budget of the Exchange phase.
    """

    session_id: int
    N: int
    alice_qubits: tuple[QubitDescriptor, ...]
    bob_qubits: tuple[QubitDescriptor, ...]
    alice_cross_bits: tuple[QubitDescriptor, ...]
    bob_cross_bits: tuple[QubitDescriptor, ...]
    deadline: int

    def __post_init__(self):
        for name in ("alice_qubits", "bob_qubits", "alice_cross_bits", "bob_cross_bits"):
            object.__setattr__(self, name, tuple(getattr(self, name)))
            if len(getattr(self, name)) != self.N:
                raise ValueError(f"{name} has length {len(getattr(self, name))}, expected {self.N}")
        if self.alice_cross_bits != self.bob_qubits or self.bob_cross_bits != self.alice_qubits:
            raise ValueError("cross bits must equal the opposite client's descriptors")
        if self.N < 1:
            raise ValueError("N must be at least 1")
        if self.deadline < 0:
            raise ValueError("deadline must be non-negative")

    def qubits(self, party: Party) -> tuple[QubitDescriptor, ...]:
        return self.alice_qubits if party is Party.ALICE else self.bob_qubits

    def cross_bits(self, party: Party) -> tuple[QubitDescriptor, ...]:
        return self.alice_cross_bits if party is Party.ALICE else self.bob_cross_bits

    def swapped(self) -> "SessionRecord":
        """The same session with the clients' roles exchanged."""
        return SessionRecord(self.session_id, self.N, self.bob_qubits, self.alice_qubits,
                             self.bob_cross_bits, self.alice_cross_bits, self.deadline)


def make_session(session_id: int, alice_qubits, bob_qubits, deadline: int | None = None) -> SessionRecord:
    alice_qubits, bob_qubits = tuple(alice_qubits), tuple(bob_qubits)
    n = len(alice_qubits)
    return SessionRecord(session_id, n, alice_qubits, bob_qubits, bob_qubits, alice_qubits,
                         n if deadline is None else deadline)


def init_session(N: int, rng: np.random.Generator, session_id: int = 1,
                 deadline: int | None = None) -> SessionRecord:
    """Prepare ``N`` qubit pairs and the cross-distributed classical bits."""
    if N < 1:
        raise ValueError(f"N must be at least 1, got {N}")
    alice = prepare_sequence(N, rng)
    bob = prepare_sequence(N, rng)
    return make_session(session_id, alice, bob, deadline)


class Trent:
    """Trusted third party: issues sessions with identifiers unique to this instance."""

    def __init__(self, rng: np.random.Generator):
        self.rng = rng
        self.sessions: dict[int, SessionRecord] = {}
        self._ids = itertools.count(1)
        self._lock = threading.Lock()

    def init_session(self, N: int, deadline: int | None = None) -> SessionRecord:
        with self._lock:
            sid = next(self._ids)
            record = init_session(N, self.rng, session_id=sid, deadline=deadline)
            self.sessions[sid] = record
        return record
