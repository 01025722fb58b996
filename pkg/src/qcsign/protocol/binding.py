"""Trent's Binding phase: lying check and contract verdict."""

from __future__ import annotations

import enum
import math
from dataclasses import dataclass

import numpy as np

from qcsign import thresholds
from qcsign.analysis.distributions import AlphaDistribution
from qcsign.protocol.session import Party, SessionRecord
from qcsign.quantum import Basis, QubitDescriptor


@dataclass(frozen=True)
class BindingClaim:
    """Per-qubit basis a client says it measured, and the outcome it presents."""

    party: Party
    bases: tuple[Basis, ...]
    outcomes: tuple[int, ...]

    def __post_init__(self):
        object.__setattr__(self, "party", Party(self.party))
        object.__setattr__(self, "bases", tuple(Basis(b) if not isinstance(b, Basis) else b
                                                for b in self.bases))
        object.__setattr__(self, "outcomes", tuple(int(o) for o in self.outcomes))
        if len(self.bases) != len(self.outcomes):
            raise ValueError("claim bases and outcomes differ in length")
        if any(o not in (0, 1) for o in self.outcomes):
            raise ValueError("claim outcomes must be bits")

    def __len__(self) -> int:
        return len(self.bases)

    @classmethod
    def uniform(cls, party: Party, basis: Basis, outcomes) -> "BindingClaim":
        outcomes = tuple(outcomes)
        return cls(party, (basis,) * len(outcomes), outcomes)


class CheaterFlag(enum.IntEnum):
    NONE = 0
    ALICE = 1
    BOB = 2
    BOTH = 3


@dataclass(frozen=True)
class PartyResult:
    n_accept: int
    n_reject: int
    accept_correct: int
    reject_correct: int
    accept_mismatch: int
    reject_mismatch: int
    flagged: bool
    accepts: bool
    rejects: bool


@dataclass(frozen=True)
class Verdict:
    contract_valid: bool
    cheater: CheaterFlag
    alpha: float
    counts: tuple[int, int, int, int]

    def swapped(self) -> "Verdict":
        flag = {CheaterFlag.ALICE: CheaterFlag.BOB, CheaterFlag.BOB: CheaterFlag.ALICE}
        a_acc, a_rej, b_acc, b_rej = self.counts
        return Verdict(self.contract_valid, flag.get(self.cheater, self.cheater), self.alpha,
                       (b_acc, b_rej, a_acc, a_rej))


def evaluate_party(qubits: tuple[QubitDescriptor, ...], claim: BindingClaim,
                   alpha: float, eta: float) -> PartyResult:
    """Score one client's claim against Trent's preparation record.

    A mismatch is a wrong outcome on a qubit whose claimed basis equals its
    preparation basis. The client is flagged as lying when mismatches in a
    basis exceed what the acceptance ratio tolerates plus the ``eta`` noise
    budget; a flagged client neither accepts nor rejects.
    """
    n_accept = sum(q.basis_bit for q in qubits)
    n_reject = len(qubits) - n_accept
    acc_ok = acc_bad = rej_ok = rej_bad = 0
    claimed_accept = 0
    for q, basis, outcome in zip(qubits, claim.bases, claim.outcomes):
        b = basis.value
        claimed_accept += b
        if b != q.basis_bit:
            continue
        right = outcome == q.state_bit
        if b:
            acc_ok += right
            acc_bad += not right
        else:
            rej_ok += right
            rej_bad += not right
    claimed_reject = len(claim) - claimed_accept
    accept_allowance = n_accept - thresholds.required_accept_correct(alpha, n_accept)
    reject_allowance = thresholds.allowed_reject_wrong(alpha, n_reject)
    flagged = (acc_bad > accept_allowance + math.ceil(eta * n_accept)
               or rej_bad > reject_allowance + math.ceil(eta * n_reject))
    accepts = (not flagged and claimed_accept > 0
               and acc_ok >= thresholds.required_accept_correct(alpha, n_accept))
    rejects = (not flagged and claimed_reject > 0
               and n_reject - rej_ok <= reject_allowance)
    return PartyResult(n_accept, n_reject, acc_ok, rej_ok, acc_bad, rej_bad,
                       flagged, accepts, rejects)


def binding_verdict(session: SessionRecord, claim_a: BindingClaim, claim_b: BindingClaim,
                    alpha: float, eta: float = 0.0) -> Verdict:
    """Declare the contract valid if one client accepts while the other fails to reject."""
    if not 0.5 < alpha < 1.0:
        raise ValueError(f"alpha must lie in (1/2, 1), got {alpha}")
    if not 0.0 <= eta < 1.0:
        raise ValueError(f"eta must lie in [0, 1), got {eta}")
    for claim, party in ((claim_a, Party.ALICE), (claim_b, Party.BOB)):
        if len(claim) != session.N:
            raise ValueError(f"{party.name} claim has length {len(claim)}, expected {session.N}")
        if claim.party is not party:
            raise ValueError(f"claim from {claim.party.name} submitted as {party.name}")
    alice = evaluate_party(session.alice_qubits, claim_a, alpha, eta)
    bob = evaluate_party(session.bob_qubits, claim_b, alpha, eta)
    valid = (alice.accepts and not bob.rejects) or (bob.accepts and not alice.rejects)
    cheater = CheaterFlag(alice.flagged * CheaterFlag.ALICE + bob.flagged * CheaterFlag.BOB)
    return Verdict(valid, cheater, float(alpha),
                   (alice.accept_correct, alice.reject_correct, bob.accept_correct, bob.reject_correct))


def sample_alpha(dist: AlphaDistribution, rng: np.random.Generator) -> float:
    return dist.sample(rng)
