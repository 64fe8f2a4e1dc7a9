"""Line-delimited JSON frames for running the two agents in separate processes.

Frame layout, one per line::

    {"v":1,"sid":"<session id>","seq":<n>,"msg":{"t":..,"from":..,"kind":..,...}}

``seq`` counts frames per direction from 0. ``msg`` is the transcript
entry for the move. The reliable ordered stream (TCP) does the rest; the
exchange is half duplex and follows the protocol's turn order.
"""

from __future__ import annotations

import json
import socket
import time
from dataclasses import dataclass
from typing import Any, BinaryIO

from .constraints import AtomicConstraint
from .model import Protocol
from .protocol import (
    Exchange,
    Kind,
    Message,
    NegotiationRecord,
    ProtocolViolation,
    SessionConfig,
    TerminationReason,
    make_agent,
)

WIRE_VERSION = 1
MAX_LINE = 1 << 20


class DecodeError(ValueError):
    """A frame that cannot be accepted. ``code`` is one of
    ``malformed``, ``schema``, ``version``, ``unknown_kind``, ``protocol``."""

    def __init__(self, code: str, detail: str = ""):
        super().__init__(f"{code}: {detail}" if detail else code)
        self.code = code
        self.detail = detail


@dataclass(frozen=True)
class Frame:
    msg: Message
    sid: str
    seq: int
    t: int
    sender: str


def encode(msg: Message, sid: str, seq: int, t: int = 0, sender: str = "A") -> bytes:
    body = {"v": WIRE_VERSION, "sid": sid, "seq": seq, "msg": msg.to_dict(t, sender)}
    return (json.dumps(body, separators=(",", ":"), ensure_ascii=False) + "\n").encode("utf-8")


def _int(value: Any, what: str) -> int:
    if isinstance(value, bool) or not isinstance(value, int):
        raise DecodeError("schema", f"{what} must be an integer")
    return value


def _int_list(value: Any, what: str) -> tuple[int, ...]:
    if not isinstance(value, list):
        raise DecodeError("schema", f"{what} must be a list")
    return tuple(_int(x, what) for x in value)


def decode(line: bytes | str, expected_protocol: Protocol) -> Frame:
    if isinstance(line, bytes):
        try:
            line = line.decode("utf-8")
        except UnicodeDecodeError as exc:
            raise DecodeError("malformed", "not UTF-8") from exc
    if line.endswith("\n"):
        line = line[:-1]
    if "\n" in line:
        raise DecodeError("malformed", "embedded newline")
    try:
        body = json.loads(line)
    except (ValueError, RecursionError) as exc:
        raise DecodeError("malformed", str(exc)[:80]) from exc
    if not isinstance(body, dict):
        raise DecodeError("malformed", "frame is not an object")
    if "v" not in body:
        raise DecodeError("schema", "missing version")
    if _int(body["v"], "v") != WIRE_VERSION:
        raise DecodeError("version", f"got {body['v']}, speak {WIRE_VERSION}")
    sid = body.get("sid")
    if not isinstance(sid, str):
        raise DecodeError("schema", "sid must be a string")
    seq = _int(body.get("seq"), "seq")
    if seq < 0:
        raise DecodeError("schema", "negative seq")
    raw = body.get("msg")
    if not isinstance(raw, dict):
        raise DecodeError("schema", "msg must be an object")
    t = _int(raw.get("t"), "t")
    sender = raw.get("from")
    if sender not in ("A", "B"):
        raise DecodeError("schema", "from must be A or B")
    try:
        kind = Kind(raw.get("kind"))
    except ValueError as exc:
        raise DecodeError("unknown_kind", repr(raw.get("kind"))[:40]) from exc
    offer = _int_list(raw["offer"], "offer") if "offer" in raw else None
    constraints = None
    if "constraints" in raw:
        if expected_protocol is Protocol.AOP:
            raise DecodeError("protocol", "constraints in an AOP session")
        if kind is not Kind.PROPOSE:
            raise DecodeError("protocol", "constraints only travel with proposals")
        items = raw["constraints"]
        if not isinstance(items, list):
            raise DecodeError("schema", "constraints must be a list")
        pairs = [_int_list(c, "constraint") for c in items]
        if any(len(p) != 2 for p in pairs):
            raise DecodeError("schema", "a constraint is [issue, value]")
        constraints = tuple(AtomicConstraint(*p) for p in pairs)
    reason = None
    if kind is Kind.TERMINATE:
        if offer is not None:
            raise DecodeError("schema", "terminate carries no offer")
        try:
            reason = TerminationReason(raw.get("reason", TerminationReason.EXHAUSTED.value))
        except ValueError as exc:
            raise DecodeError("schema", "unknown terminate reason") from exc
    elif offer is None:
        raise DecodeError("schema", f"{kind.value} needs an offer")
    return Frame(Message(kind, offer, constraints, reason), sid, seq, t, sender)


# --------------------------------------------------------------------------
# peer


@dataclass
class PeerResult:
    record: NegotiationRecord
    bytes_sent: int
    bytes_received: int

    @property
    def bytes_on_wire(self) -> int:
        return self.bytes_sent + self.bytes_received


def transcript_bytes(record: NegotiationRecord, sid: str) -> int:
    """Bytes the transcript would occupy on the wire under session id ``sid``."""
    seqs = {"A": 0, "B": 0}
    total = 0
    for entry in record.transcript or ():
        total += len(encode(entry.message, sid, seqs[entry.sender], entry.t, entry.sender))
        seqs[entry.sender] += 1
    return total


def run_peer(
    stream: BinaryIO,
    role: str,
    config: SessionConfig,
    sid: str,
    keep_transcript: bool = True,
) -> PeerResult:
    """Play ``role`` over an already connected binary stream until the session ends."""
    other = "B" if role == "A" else "A"
    agent = make_agent(config, role)
    exchange = Exchange(config.space, config.protocol, config.max_proposals)
    sent = received = 0
    seq_out = seq_in = 0
    while not exchange.ended:
        if exchange.to_move == role:
            msg = agent.act(exchange.last_message, exchange.proposals, config.max_proposals)
            if msg is None:
                exchange.time_out()
                break
            t = len(exchange.transcript)
            exchange.post(role, msg)
            data = encode(msg, sid, seq_out, t, role)
            stream.write(data)
            stream.flush()
            sent += len(data)
            seq_out += 1
        else:
            line = stream.readline(MAX_LINE)
            if not line:
                # the mover ends a capped session by hanging up
                exchange.time_out()
                break
            received += len(line)
            frame = decode(line, config.protocol)
            if frame.sid != sid:
                raise DecodeError("schema", f"session id {frame.sid!r}, expected {sid!r}")
            if frame.seq != seq_in:
                raise DecodeError("schema", f"seq {frame.seq}, expected {seq_in}")
            if frame.sender != other or frame.t != len(exchange.transcript):
                raise ProtocolViolation("out_of_turn", f"frame t={frame.t} from {frame.sender}")
            seq_in += 1
            exchange.post(other, frame.msg)
    return PeerResult(exchange.record(config.profile_a, config.profile_b, keep_transcript), sent, received)


def parse_address(address: str) -> tuple[str, int]:
    host, _, port = address.rpartition(":")
    return host or "127.0.0.1", int(port)


def listen(address: str) -> socket.socket:
    server = socket.create_server(parse_address(address))
    return server


def connect(address: str, timeout: float = 10.0) -> socket.socket:
    host, port = parse_address(address)
    deadline = time.monotonic() + timeout
    while True:
        try:
            return socket.create_connection((host, port), timeout=timeout)
        except OSError:
            if time.monotonic() > deadline:
                raise
            time.sleep(0.05)


def serve_session(server: socket.socket, role: str, config: SessionConfig, sid: str) -> PeerResult:
    conn, _ = server.accept()
    with conn, conn.makefile("rwb") as stream:
        return run_peer(stream, role, config, sid)


def dial_session(address: str, role: str, config: SessionConfig, sid: str) -> PeerResult:
    with connect(address) as conn, conn.makefile("rwb") as stream:
        return run_peer(stream, role, config, sid)
