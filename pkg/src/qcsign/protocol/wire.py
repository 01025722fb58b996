"""Canonical binary encoding of protocol messages and session records.

Frame: 4-byte big-endian payload length, then the payload. Payload: 1-byte
type tag, 8-byte session id, then type-specific fields in a fixed order.
Integers are big-endian; bit vectors are packed 8 per byte, most significant
bit first, with zero padding.
"""

from __future__ import annotations

import enum
import math
import struct
from dataclasses import dataclass
from pathlib import Path
from typing import ClassVar, Union

import numpy as np

from qcsign.protocol.binding import BindingClaim, CheaterFlag, Verdict
from qcsign.protocol.session import Party, SessionRecord
from qcsign.quantum import DESCRIPTORS, Basis, QubitDescriptor

MAX_FRAME = 16 * 1024 * 1024
_LEN = struct.Struct(">I")
_HEADER = struct.Struct(">BQ")


class DecodeError(ValueError):
    pass


class TruncatedFrame(DecodeError):
    pass


class OversizeFrame(DecodeError):
    pass


class MalformedPayload(DecodeError):
    pass


class Tag(enum.IntEnum):
    INIT_REQUEST = 1
    INIT_GRANT = 2
    OUTCOME_REPORT = 3
    BIND_REQUEST = 4
    BIND_CLAIM = 5
    VERDICT_NOTICE = 6
    SESSION_RECORD = 16


@dataclass(frozen=True)
class InitRequest:
    TAG: ClassVar[Tag] = Tag.INIT_REQUEST
    session_id: int
    party: Party
    n: int
    deadline: int


@dataclass(frozen=True)
class InitGrant:
    TAG: ClassVar[Tag] = Tag.INIT_GRANT
    session_id: int
    party: Party
    deadline: int
    qubits: tuple[QubitDescriptor, ...]
    cross_bits: tuple[QubitDescriptor, ...]


@dataclass(frozen=True)
class OutcomeReport:
    TAG: ClassVar[Tag] = Tag.OUTCOME_REPORT
    session_id: int
    party: Party
    m: int
    bit: int


@dataclass(frozen=True)
class BindRequest:
    TAG: ClassVar[Tag] = Tag.BIND_REQUEST
    session_id: int
    party: Party


@dataclass(frozen=True)
class BindClaim:
    TAG: ClassVar[Tag] = Tag.BIND_CLAIM
    session_id: int
    claim: BindingClaim


@dataclass(frozen=True)
class VerdictNotice:
    TAG: ClassVar[Tag] = Tag.VERDICT_NOTICE
    session_id: int
    verdict: Verdict


WireMessage = Union[InitRequest, InitGrant, OutcomeReport, BindRequest, BindClaim, VerdictNotice]


def pack_bits(bits) -> bytes:
    bits = np.asarray(list(bits), dtype=np.uint8)
    return np.packbits(bits, bitorder="big").tobytes()


class _Reader:
    def __init__(self, data: bytes):
        self.data = data
        self.pos = 0

    def take(self, n: int) -> bytes:
        if self.pos + n > len(self.data):
            raise MalformedPayload(f"payload ends after {len(self.data)} bytes, needed {self.pos + n}")
        chunk = self.data[self.pos:self.pos + n]
        self.pos += n
        return chunk

    def unpack(self, fmt: str):
        s = struct.Struct(">" + fmt)
        return s.unpack(self.take(s.size))

    def bits(self, n: int) -> list[int]:
        raw = self.take(math.ceil(n / 8))
        arr = np.unpackbits(np.frombuffer(raw, dtype=np.uint8), bitorder="big")
        if arr[n:].any():
            raise MalformedPayload("non-zero padding bits")
        return arr[:n].tolist()

    def party(self) -> Party:
        (p,) = self.unpack("B")
        if p not in (0, 1):
            raise MalformedPayload(f"unknown party {p}")
        return Party(p)

    def descriptors(self, n: int) -> tuple[QubitDescriptor, ...]:
        basis = self.bits(n)
        state = self.bits(n)
        return tuple(DESCRIPTORS[2 * b + s] for b, s in zip(basis, state))

    def done(self) -> None:
        if self.pos != len(self.data):
            raise MalformedPayload(f"{len(self.data) - self.pos} trailing bytes")


def _descriptor_bytes(descs) -> bytes:
    return pack_bits(d.basis_bit for d in descs) + pack_bits(d.state_bit for d in descs)


def _u32(value: int, name: str) -> bytes:
    if not 0 <= value < 2 ** 32:
        raise ValueError(f"{name}={value} does not fit in 32 bits")
    return struct.pack(">I", value)


def _payload(msg) -> bytes:
    if not 0 <= msg.session_id < 2 ** 64:
        raise ValueError("session_id must fit in 64 bits")
    head = _HEADER.pack(int(msg.TAG), msg.session_id)
    if isinstance(msg, InitRequest):
        return head + bytes([msg.party]) + _u32(msg.n, "n") + _u32(msg.deadline, "deadline")
    if isinstance(msg, InitGrant):
        if len(msg.qubits) != len(msg.cross_bits):
            raise ValueError("grant qubits and cross bits differ in length")
        return (head + bytes([msg.party]) + _u32(len(msg.qubits), "n")
                + _u32(msg.deadline, "deadline")
                + _descriptor_bytes(msg.qubits) + _descriptor_bytes(msg.cross_bits))
    if isinstance(msg, OutcomeReport):
        if msg.bit not in (0, 1):
            raise ValueError("outcome must be a bit")
        return head + bytes([msg.party]) + _u32(msg.m, "m") + bytes([msg.bit])
    if isinstance(msg, BindRequest):
        return head + bytes([msg.party])
    if isinstance(msg, BindClaim):
        c = msg.claim
        return (head + bytes([c.party]) + _u32(len(c), "n")
                + pack_bits(b.bit for b in c.bases) + pack_bits(c.outcomes))
    if isinstance(msg, VerdictNotice):
        v = msg.verdict
        return (head + bytes([int(v.contract_valid), int(v.cheater)]) + struct.pack(">d", v.alpha)
                + b"".join(_u32(c, "count") for c in v.counts))
    raise TypeError(f"not a wire message: {type(msg).__name__}")


def frame(payload: bytes) -> bytes:
    if len(payload) > MAX_FRAME:
        raise ValueError(f"payload of {len(payload)} bytes exceeds the {MAX_FRAME}-byte limit")
    return _LEN.pack(len(payload)) + payload


def encode_message(msg: WireMessage) -> bytes:
    return frame(_payload(msg))


def unframe(data: bytes) -> bytes:
    """Return the payload of exactly one frame."""
    if len(data) < _LEN.size:
        raise TruncatedFrame(f"need 4 length bytes, got {len(data)}")
    (length,) = _LEN.unpack_from(data)
    if length > MAX_FRAME:
        raise OversizeFrame(f"declared length {length} exceeds {MAX_FRAME}")
    body = data[_LEN.size:]
    if len(body) < length:
        raise TruncatedFrame(f"declared {length} payload bytes, got {len(body)}")
    if len(body) > length:
        raise MalformedPayload(f"{len(body) - length} bytes after the frame")
    return body


def decode_payload(payload: bytes):
    r = _Reader(payload)
    tag_value, sid = r.unpack("BQ")
    try:
        tag = Tag(tag_value)
    except ValueError:
        raise MalformedPayload(f"unknown message tag {tag_value}") from None
    if tag is Tag.INIT_REQUEST:
        party = r.party()
        n, deadline = r.unpack("II")
        msg = InitRequest(sid, party, n, deadline)
    elif tag is Tag.INIT_GRANT:
        party = r.party()
        n, deadline = r.unpack("II")
        msg = InitGrant(sid, party, deadline, r.descriptors(n), r.descriptors(n))
    elif tag is Tag.OUTCOME_REPORT:
        party = r.party()
        m, bit = r.unpack("IB")
        if bit not in (0, 1):
            raise MalformedPayload(f"outcome byte {bit} is not a bit")
        msg = OutcomeReport(sid, party, m, bit)
    elif tag is Tag.BIND_REQUEST:
        msg = BindRequest(sid, r.party())
    elif tag is Tag.BIND_CLAIM:
        party = r.party()
        (n,) = r.unpack("I")
        bases = [Basis.from_bit(b) for b in r.bits(n)]
        msg = BindClaim(sid, BindingClaim(party, tuple(bases), tuple(r.bits(n))))
    elif tag is Tag.VERDICT_NOTICE:
        valid, cheater = r.unpack("BB")
        (alpha,) = r.unpack("d")
        counts = r.unpack("IIII")
        if valid not in (0, 1) or cheater > 3:
            raise MalformedPayload("bad verdict flags")
        msg = VerdictNotice(sid, Verdict(bool(valid), CheaterFlag(cheater), alpha, tuple(counts)))
    else:
        n, deadline = r.unpack("II")
        alice, bob = r.descriptors(n), r.descriptors(n)
        alice_cross, bob_cross = r.descriptors(n), r.descriptors(n)
        try:
            msg = SessionRecord(sid, n, alice, bob, alice_cross, bob_cross, deadline)
        except ValueError as exc:
            raise MalformedPayload(str(exc)) from None
    r.done()
    return msg


def decode_message(data: bytes) -> WireMessage:
    msg = decode_payload(unframe(data))
    if isinstance(msg, SessionRecord):
        raise MalformedPayload("frame holds a session record, not a message")
    return msg


def encode_session(record: SessionRecord) -> bytes:
    payload = (_HEADER.pack(int(Tag.SESSION_RECORD), record.session_id)
               + _u32(record.N, "N") + _u32(record.deadline, "deadline")
               + _descriptor_bytes(record.alice_qubits) + _descriptor_bytes(record.bob_qubits)
               + _descriptor_bytes(record.alice_cross_bits) + _descriptor_bytes(record.bob_cross_bits))
    return frame(payload)


def decode_session(data: bytes) -> SessionRecord:
    record = decode_payload(unframe(data))
    if not isinstance(record, SessionRecord):
        raise MalformedPayload(f"expected a session record, got {type(record).__name__}")
    return record


def save_session(path, record: SessionRecord) -> None:
    Path(path).write_bytes(encode_session(record))


def load_session(path) -> SessionRecord:
    return decode_session(Path(path).read_bytes())


def save_message(path, msg: WireMessage) -> None:
    Path(path).write_bytes(encode_message(msg))


def load_message(path) -> WireMessage:
    return decode_message(Path(path).read_bytes())
