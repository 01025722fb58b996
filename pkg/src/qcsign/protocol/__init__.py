"""Trent and the two clients: Initialization, Exchange and Binding."""

from qcsign.protocol.binding import (
    BindingClaim,
    CheaterFlag,
    PartyResult,
    Verdict,
    binding_verdict,
    evaluate_party,
    sample_alpha,
)
from qcsign.protocol.exchange import (
    AbortReason,
    Client,
    DirectLink,
    Exchange,
    ExchangeTranscript,
    MemoryLink,
    ProtocolError,
    Round,
    TransportError,
    run_exchange,
)
from qcsign.protocol.session import Party, SessionRecord, Trent, init_session, make_session
from qcsign.protocol.strategy import Intent, Strategy, StrategyKind, rotated_accept_fraction
from qcsign.protocol.wire import (
    DecodeError,
    MalformedPayload,
    OversizeFrame,
    TruncatedFrame,
    decode_message,
    encode_message,
    load_session,
    save_session,
)

__all__ = [
    "AbortReason", "BindingClaim", "CheaterFlag", "Client", "DecodeError", "DirectLink",
    "Exchange", "ExchangeTranscript", "Intent", "MalformedPayload", "MemoryLink",
    "OversizeFrame", "Party", "PartyResult", "ProtocolError", "Round", "SessionRecord",
    "Strategy", "StrategyKind", "TransportError", "Trent", "TruncatedFrame", "Verdict",
    "binding_verdict", "decode_message", "encode_message", "evaluate_party", "init_session",
    "load_session", "make_session", "rotated_accept_fraction", "run_exchange", "sample_alpha",
    "save_session",
]
