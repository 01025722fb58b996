"""Client measurement strategies for the Exchange phase."""

from __future__ import annotations

import enum
import math
from dataclasses import dataclass

from qcsign.quantum import ACCEPT_OBS, REJECT_OBS, Basis, Observable


class StrategyKind(enum.Enum):
    HONEST = "honest"
    ALWAYS_REJECT = "always-reject"
    MIXED_REJECT = "mixed-reject"
    ROTATED = "rotated"
    GUESSER = "guesser"


class Intent(enum.Enum):
    """What a client wants once the exchange stops early."""

    BIND = "bind"
    REFUSE = "refuse"

    @property
    def basis(self) -> Basis:
        return Basis.ACCEPT if self is Intent.BIND else Basis.REJECT


@dataclass(frozen=True)
class Strategy:
    """Which observable a client measures in each round (1-based).

    ``rounds`` restricts the deviating behaviour of ``MIXED_REJECT``,
    ``ROTATED`` and ``GUESSER`` to a set of rounds (``None`` means every
    round); the Accept observable is measured elsewhere. A client with
    ``halt_after = k`` sends nothing after round ``k``.
    """

    kind: StrategyKind = StrategyKind.HONEST
    rounds: frozenset[int] | None = None
    theta: float = 0.0
    phi: float = 0.0
    intent: Intent = Intent.BIND
    halt_after: int | None = None

    def __post_init__(self):
        if self.kind is StrategyKind.MIXED_REJECT and self.rounds is None:
            object.__setattr__(self, "rounds", frozenset())
        if self.rounds is not None:
            object.__setattr__(self, "rounds", frozenset(int(r) for r in self.rounds))
        if self.kind is StrategyKind.ROTATED:
            Observable.rotated(self.theta, self.phi)  # range check

    @classmethod
    def honest(cls, intent: Intent = Intent.BIND) -> "Strategy":
        return cls(StrategyKind.HONEST, intent=intent)

    @classmethod
    def always_reject(cls, intent: Intent = Intent.REFUSE) -> "Strategy":
        return cls(StrategyKind.ALWAYS_REJECT, intent=intent)

    @classmethod
    def mixed_reject(cls, rounds, intent: Intent = Intent.BIND) -> "Strategy":
        return cls(StrategyKind.MIXED_REJECT, rounds=frozenset(rounds), intent=intent)

    @classmethod
    def rotated(cls, theta: float, phi: float = 0.0, rounds=None,
                intent: Intent = Intent.BIND) -> "Strategy":
        return cls(StrategyKind.ROTATED, rounds=None if rounds is None else frozenset(rounds),
                   theta=float(theta), phi=float(phi), intent=intent)

    @classmethod
    def guesser(cls, rounds=None, intent: Intent = Intent.BIND) -> "Strategy":
        return cls(StrategyKind.GUESSER, rounds=None if rounds is None else frozenset(rounds),
                   intent=intent)

    def validate(self, n: int) -> None:
        if self.rounds is not None and any(not 1 <= r <= n for r in self.rounds):
            bad = sorted(r for r in self.rounds if not 1 <= r <= n)
            raise ValueError(f"{self.kind.value} rounds {bad} outside 1..{n}")
        if self.halt_after is not None and self.halt_after < 0:
            raise ValueError("halt_after must be non-negative")

    def _in_rounds(self, m: int) -> bool:
        return self.rounds is None or m in self.rounds

    def deviates(self, m: int) -> bool:
        """True when round ``m`` uses the strategy's own observable (or a guess).

        A rotated observable with ``theta = 0`` still counts; it is simply
        indistinguishable from the Accept measurement.
        """
        if self.kind is StrategyKind.HONEST:
            return False
        if self.kind is StrategyKind.ALWAYS_REJECT:
            return True
        return self._in_rounds(m)

    def observable(self, m: int) -> Observable | None:
        """Observable for round ``m``; ``None`` means report a guess without measuring."""
        if self.kind is StrategyKind.HONEST:
            return ACCEPT_OBS
        if self.kind is StrategyKind.ALWAYS_REJECT:
            return REJECT_OBS
        if not self._in_rounds(m):
            return ACCEPT_OBS
        if self.kind is StrategyKind.MIXED_REJECT:
            return REJECT_OBS
        if self.kind is StrategyKind.ROTATED:
            return Observable.rotated(self.theta, self.phi)
        return None

    def sends(self, m: int) -> bool:
        return self.halt_after is None or m <= self.halt_after

    def describe(self) -> str:
        text = self.kind.value
        if self.kind is StrategyKind.ROTATED:
            text += f":{self.theta!r},{self.phi!r}"
            if self.rounds is not None:
                text += ":" + ",".join(map(str, sorted(self.rounds)))
        elif self.rounds is not None and self.kind is not StrategyKind.HONEST:
            text += ":" + ",".join(map(str, sorted(self.rounds)))
        text += "@" + self.intent.value
        if self.halt_after is not None:
            text += f"#{self.halt_after}"
        return text

    @classmethod
    def parse(cls, text: str) -> "Strategy":
        """Parse ``kind[:args][@bind|@refuse][#halt_after]``.

        Examples: ``honest``, ``always-reject@refuse``, ``mixed-reject:1,4``,
        ``rotated:1.0471975511965976,0:1,2,3``, ``guesser:5@bind#7``.
        """
        halt = None
        if "#" in text:
            text, halt_text = text.split("#", 1)
            halt = int(halt_text)
        intent = None
        if "@" in text:
            text, intent_text = text.split("@", 1)
            intent = Intent(intent_text.strip().lower())
        head, _, args = text.strip().partition(":")
        kind = StrategyKind(head.strip().lower())
        rounds = None
        theta = phi = 0.0
        if kind is StrategyKind.ROTATED:
            angle_text, _, round_text = args.partition(":")
            if not angle_text:
                raise ValueError("rotated strategy needs an angle, e.g. rotated:1.0")
            angles = [float(a) for a in angle_text.split(",")]
            theta = angles[0]
            phi = angles[1] if len(angles) > 1 else 0.0
            rounds = _parse_rounds(round_text) if round_text else None
        elif args:
            if kind in (StrategyKind.HONEST, StrategyKind.ALWAYS_REJECT):
                raise ValueError(f"{kind.value} takes no arguments")
            rounds = _parse_rounds(args)
        if intent is None:
            intent = Intent.REFUSE if kind is StrategyKind.ALWAYS_REJECT else Intent.BIND
        return cls(kind, rounds=rounds, theta=theta, phi=phi, intent=intent, halt_after=halt)


def _parse_rounds(text: str) -> frozenset[int]:
    out: set[int] = set()
    for part in text.split(","):
        part = part.strip()
        if not part:
            continue
        if "-" in part:
            a, b = part.split("-", 1)
            out.update(range(int(a), int(b) + 1))
        else:
            out.add(int(part))
    return frozenset(out)


def rotated_accept_fraction(theta: float) -> float:
    """``q_a = cos(theta)``: equivalent fraction of Accept measurements."""
    return math.cos(theta)
