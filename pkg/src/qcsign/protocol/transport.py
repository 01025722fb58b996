"""Byte-stream transport: framed sockets, a socket link and a TCP Trent."""

from __future__ import annotations

import logging
import socket
import socketserver
import threading

import numpy as np

from qcsign.analysis.distributions import AlphaDistribution
from qcsign.protocol import wire
from qcsign.protocol.binding import BindingClaim, binding_verdict
from qcsign.protocol.exchange import DirectLink, ProtocolError
from qcsign.protocol.session import Party, SessionRecord, Trent

log = logging.getLogger(__name__)


class FramedSocket:
    """Reads and writes whole frames on a connected stream socket."""

    def __init__(self, sock: socket.socket, timeout: float | None = None):
        self.sock = sock
        self.sock.settimeout(timeout)

    def send(self, msg) -> None:
        self.sock.sendall(wire.encode_message(msg))

    def _read_exact(self, n: int) -> bytes:
        buf = bytearray()
        while len(buf) < n:
            chunk = self.sock.recv(n - len(buf))
            if not chunk:
                raise wire.TruncatedFrame(f"connection closed after {len(buf)} of {n} bytes")
            buf.extend(chunk)
        return bytes(buf)

    def recv(self):
        head = self._read_exact(4)
        length = int.from_bytes(head, "big")
        if length > wire.MAX_FRAME:
            raise wire.OversizeFrame(f"declared length {length} exceeds {wire.MAX_FRAME}")
        return wire.decode_message(head + self._read_exact(length))

    def close(self) -> None:
        self.sock.close()


class SocketLink(DirectLink):
    """Client-to-client channel over a socket pair; ``timeout`` is the per-round deadline."""

    def __init__(self, timeout: float | None = 5.0):
        a, b = socket.socketpair()
        self.ends = {Party.ALICE: FramedSocket(a, timeout), Party.BOB: FramedSocket(b, timeout)}

    def deliver(self, session_id, party, m, bit):
        self.ends[party].send(wire.OutcomeReport(session_id, party, m, bit))
        msg = self.ends[party.other].recv()
        if not isinstance(msg, wire.OutcomeReport) or msg.party is not party:
            raise ProtocolError(f"unexpected message {msg!r}")
        return msg.m, msg.bit

    def close(self):
        for end in self.ends.values():
            end.close()


class TrentService:
    """Trent's endpoints, independent of any socket.

    ``InitRequest`` with session id 0 opens a new session; with a known id it
    returns that party's grant. ``BindRequest`` waits until both claims for
    the session are in, then answers with the verdict. One alpha is drawn per
    session.
    """

    def __init__(self, rng: np.random.Generator, alpha_dist: AlphaDistribution | None = None,
                 eta: float = 0.0, bind_timeout: float = 30.0):
        self.trent = Trent(rng)
        self.rng = rng
        self.alpha_dist = AlphaDistribution.uniform(0.9, 0.99) if alpha_dist is None else alpha_dist
        self.eta = eta
        self.bind_timeout = bind_timeout
        self.claims: dict[int, dict[Party, BindingClaim]] = {}
        self.alphas: dict[int, float] = {}
        self._cond = threading.Condition()

    def handle(self, msg):
        if isinstance(msg, wire.InitRequest):
            return self._init(msg)
        if isinstance(msg, wire.BindClaim):
            with self._cond:
                record = self._session(msg.session_id)
                if len(msg.claim) != record.N:
                    raise ProtocolError(f"claim length {len(msg.claim)} != {record.N}")
                self.claims.setdefault(msg.session_id, {})[msg.claim.party] = msg.claim
                self._cond.notify_all()
            return None
        if isinstance(msg, wire.BindRequest):
            return self._bind(msg)
        raise ProtocolError(f"Trent does not accept {type(msg).__name__}")

    def _session(self, sid: int) -> SessionRecord:
        try:
            return self.trent.sessions[sid]
        except KeyError:
            raise ProtocolError(f"unknown session {sid}") from None

    def _init(self, msg: wire.InitRequest) -> wire.InitGrant:
        if msg.session_id == 0:
            deadline = msg.deadline if msg.deadline else None
            record = self.trent.init_session(msg.n, deadline)
        else:
            record = self._session(msg.session_id)
        return wire.InitGrant(record.session_id, msg.party, record.deadline,
                              record.qubits(msg.party), record.cross_bits(msg.party))

    def _bind(self, msg: wire.BindRequest) -> wire.VerdictNotice:
        with self._cond:
            record = self._session(msg.session_id)
            ready = self._cond.wait_for(lambda: len(self.claims.get(msg.session_id, {})) == 2,
                                        timeout=self.bind_timeout)
            if not ready:
                raise TimeoutError(f"session {msg.session_id}: claims missing at Binding")
            if msg.session_id not in self.alphas:
                self.alphas[msg.session_id] = self.alpha_dist.sample(self.rng)
            claims = self.claims[msg.session_id]
            verdict = binding_verdict(record, claims[Party.ALICE], claims[Party.BOB],
                                      self.alphas[msg.session_id], self.eta)
        return wire.VerdictNotice(msg.session_id, verdict)


class _Handler(socketserver.BaseRequestHandler):
    def handle(self):
        conn = FramedSocket(self.request, timeout=self.server.conn_timeout)
        while True:
            try:
                msg = conn.recv()
            except (wire.TruncatedFrame, ConnectionError):
                return
            except (wire.DecodeError, TimeoutError) as exc:
                log.warning("dropping connection: %s", exc)
                return
            try:
                reply = self.server.service.handle(msg)
            except (ProtocolError, ValueError, TimeoutError) as exc:
                log.warning("request refused: %s", exc)
                return
            if reply is not None:
                conn.send(reply)


class TrentServer(socketserver.ThreadingTCPServer):
    daemon_threads = True
    allow_reuse_address = True

    def __init__(self, address, service: TrentService, conn_timeout: float | None = 60.0):
        self.service = service
        self.conn_timeout = conn_timeout
        super().__init__(address, _Handler)

    def start(self) -> threading.Thread:
        thread = threading.Thread(target=self.serve_forever, daemon=True)
        thread.start()
        return thread


class TrentClient:
    """A client's connection to Trent."""

    def __init__(self, address, timeout: float | None = 30.0):
        self.conn = FramedSocket(socket.create_connection(address, timeout=timeout), timeout)

    def init(self, party: Party, n: int = 0, session_id: int = 0, deadline: int = 0) -> wire.InitGrant:
        self.conn.send(wire.InitRequest(session_id, party, n, deadline))
        return self.conn.recv()

    def submit(self, session_id: int, claim: BindingClaim) -> None:
        self.conn.send(wire.BindClaim(session_id, claim))

    def verdict(self, session_id: int, party: Party):
        self.conn.send(wire.BindRequest(session_id, party))
        return self.conn.recv().verdict

    def close(self) -> None:
        self.conn.close()

    def __enter__(self):
        return self

    def __exit__(self, *exc):
        self.close()
