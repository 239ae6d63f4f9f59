"""Classical sifting channel: message schema, framing and transports.

Wire format: a 4-byte big-endian length prefix followed by that many bytes of
UTF-8 JSON. The JSON object must carry a ``"type"`` field; fields the decoder
does not know are dropped. Encoding uses sorted keys and no whitespace so
that equal messages always produce equal bytes.
"""

from __future__ import annotations

import enum
import json
import queue
import socket
import struct
import threading
from dataclasses import dataclass, field

from .errors import ChannelClosedError, MalformedFrameError

HEADER = struct.Struct(">I")
MAX_FRAME = 64 * 1024 * 1024


class MessageType(enum.Enum):
    BASIS_ANNOUNCE = "BasisAnnounce"
    SIFT_INDICES = "SiftIndices"
    SAMPLE_DISCLOSURE = "SampleDisclosure"
    QBER_REPORT = "QberReport"
    ABORT = "Abort"


# payload field carried by each message type
_PAYLOAD = {
    MessageType.BASIS_ANNOUNCE: "bases",
    MessageType.SIFT_INDICES: "indices",
    MessageType.SAMPLE_DISCLOSURE: "disclosed",
    MessageType.QBER_REPORT: "qber",
    MessageType.ABORT: "reason",
}


@dataclass(frozen=True)
class ClassicalMessage:
    """One public-discussion message.

    Only the payload field matching ``type`` is meaningful: ``bases`` (setting
    codes, one per round), ``indices`` (kept key-slot indices), ``disclosed``
    ((slot, bit) pairs), ``qber`` (name -> value or None), or ``reason``.
    """

    type: MessageType
    round_range: tuple[int, int]
    bases: tuple[str, ...] | None = None
    indices: tuple[int, ...] | None = None
    disclosed: tuple[tuple[int, int], ...] | None = None
    qber: dict | None = field(default=None, hash=False)
    reason: str | None = None

    def __post_init__(self):
        object.__setattr__(self, "type", MessageType(self.type))
        start, stop = (int(x) for x in self.round_range)
        if not 0 <= start <= stop:
            raise ValueError(f"bad round range {self.round_range}")
        object.__setattr__(self, "round_range", (start, stop))
        if self.bases is not None:
            object.__setattr__(self, "bases", tuple(str(b) for b in self.bases))
        if self.indices is not None:
            idx = tuple(int(i) for i in self.indices)
            _check_increasing(idx)
            object.__setattr__(self, "indices", idx)
        if self.disclosed is not None:
            pairs = tuple((int(i), int(b)) for i, b in self.disclosed)
            _check_increasing([i for i, _ in pairs])
            if any(b not in (0, 1) for _, b in pairs):
                raise ValueError("disclosed bits must be 0 or 1")
            object.__setattr__(self, "disclosed", pairs)
        if self.qber is not None:
            if not isinstance(self.qber, dict) or not all(
                isinstance(k, str) and (v is None or isinstance(v, (int, float))) for k, v in self.qber.items()
            ):
                raise ValueError("qber must map names to numbers or null")
            object.__setattr__(self, "qber", dict(self.qber))
        if self.reason is not None and not isinstance(self.reason, str):
            raise ValueError("reason must be a string")
        payload = _PAYLOAD[self.type]
        if getattr(self, payload) is None:
            raise ValueError(f"{self.type.value} requires field {payload!r}")

    @property
    def payload(self):
        return getattr(self, _PAYLOAD[self.type])

    def to_json(self) -> dict:
        name = _PAYLOAD[self.type]
        value = self.payload
        if name == "disclosed":
            value = [list(p) for p in value]
        elif isinstance(value, tuple):
            value = list(value)
        return {"type": self.type.value, "round_range": list(self.round_range), name: value}


def _check_increasing(idx):
    if any(b <= a for a, b in zip(idx, idx[1:])):
        raise ValueError("indices must be strictly increasing")


def encode_message(msg: ClassicalMessage) -> bytes:
    body = json.dumps(msg.to_json(), sort_keys=True, separators=(",", ":"), ensure_ascii=False).encode("utf-8")
    return HEADER.pack(len(body)) + body


def decode_message(frame: bytes) -> ClassicalMessage:
    if len(frame) < HEADER.size:
        raise MalformedFrameError("frame shorter than its length prefix")
    (length,) = HEADER.unpack_from(frame)
    if length != len(frame) - HEADER.size:
        raise MalformedFrameError(f"length prefix says {length} bytes, frame carries {len(frame) - HEADER.size}")
    return decode_body(frame[HEADER.size :])


def decode_body(body: bytes) -> ClassicalMessage:
    try:
        text = body.decode("utf-8")
    except UnicodeDecodeError as exc:
        raise MalformedFrameError(f"invalid UTF-8: {exc}") from None
    try:
        obj = json.loads(text)
    except json.JSONDecodeError as exc:
        raise MalformedFrameError(f"invalid JSON: {exc}") from None
    if not isinstance(obj, dict) or "type" not in obj:
        raise MalformedFrameError("message must be a JSON object with a 'type' field")
    try:
        mtype = MessageType(obj["type"])
    except (ValueError, TypeError):
        raise MalformedFrameError(f"unknown message type {obj['type']!r}") from None
    name = _PAYLOAD[mtype]
    try:
        return ClassicalMessage(mtype, tuple(obj["round_range"]), **{name: obj[name]})
    except (KeyError, TypeError, ValueError) as exc:
        raise MalformedFrameError(f"bad {mtype.value} message: {exc}") from None


# --- endpoints ---------------------------------------------------------------


class Endpoint:
    """One side of a duplex channel. Keeps a transcript of every frame it sent or received."""

    def __init__(self):
        self.transcript: list[tuple[str, bytes]] = []
        self.sent = 0
        self.received = 0

    def send(self, msg: ClassicalMessage):
        frame = encode_message(msg)
        self._send_frame(frame)
        self.transcript.append(("sent", frame))
        self.sent += 1

    def recv(self, timeout: float | None = 30.0) -> ClassicalMessage:
        frame = self._recv_frame(timeout)
        self.transcript.append(("received", frame))
        self.received += 1
        return decode_message(frame)

    def transcript_bytes(self) -> bytes:
        return b"".join((b">" if d == "sent" else b"<") + f for d, f in self.transcript)

    def close(self):
        pass

    def _send_frame(self, frame: bytes):
        raise NotImplementedError

    def _recv_frame(self, timeout) -> bytes:
        raise NotImplementedError


_CLOSED = object()


class MemoryEndpoint(Endpoint):
    def __init__(self, inbox: queue.Queue, outbox: queue.Queue):
        super().__init__()
        self._inbox = inbox
        self._outbox = outbox
        self._closed = False

    def _send_frame(self, frame):
        if self._closed:
            raise ChannelClosedError("endpoint is closed")
        self._outbox.put(frame)

    def _recv_frame(self, timeout):
        try:
            item = self._inbox.get(timeout=timeout)
        except queue.Empty:
            raise ChannelClosedError("timed out waiting for peer") from None
        if item is _CLOSED:
            raise ChannelClosedError("peer closed the channel")
        return item

    def close(self):
        if not self._closed:
            self._closed = True
            self._outbox.put(_CLOSED)


def memory_pair() -> tuple[MemoryEndpoint, MemoryEndpoint]:
    a_to_b, b_to_a = queue.Queue(), queue.Queue()
    return MemoryEndpoint(b_to_a, a_to_b), MemoryEndpoint(a_to_b, b_to_a)


class SocketEndpoint(Endpoint):
    def __init__(self, sock: socket.socket):
        super().__init__()
        self._sock = sock

    def _send_frame(self, frame):
        try:
            self._sock.sendall(frame)
        except OSError as exc:
            raise ChannelClosedError(str(exc)) from None

    def _read_exact(self, n: int) -> bytes:
        chunks = []
        while n:
            try:
                chunk = self._sock.recv(n)
            except socket.timeout:
                raise ChannelClosedError("timed out waiting for peer") from None
            except OSError as exc:
                raise ChannelClosedError(str(exc)) from None
            if not chunk:
                raise ChannelClosedError("peer closed the connection")
            chunks.append(chunk)
            n -= len(chunk)
        return b"".join(chunks)

    def _recv_frame(self, timeout):
        self._sock.settimeout(timeout)
        header = self._read_exact(HEADER.size)
        (length,) = HEADER.unpack(header)
        if length > MAX_FRAME:
            raise MalformedFrameError(f"frame of {length} bytes exceeds limit")
        return header + self._read_exact(length)

    def close(self):
        try:
            self._sock.shutdown(socket.SHUT_RDWR)
        except OSError:
            pass
        self._sock.close()


def listen(host: str = "127.0.0.1", port: int = 0) -> socket.socket:
    srv = socket.create_server((host, port))
    return srv


def accept(server: socket.socket, timeout: float | None = 30.0) -> SocketEndpoint:
    server.settimeout(timeout)
    conn, _ = server.accept()
    conn.settimeout(None)
    return SocketEndpoint(conn)


def connect(host: str, port: int, timeout: float | None = 30.0) -> SocketEndpoint:
    sock = socket.create_connection((host, port), timeout=timeout)
    sock.settimeout(None)
    return SocketEndpoint(sock)


def loopback_pair(host: str = "127.0.0.1", port: int = 0) -> tuple[SocketEndpoint, SocketEndpoint]:
    """Connected TCP endpoints (server side for Alice, client side for Bob)."""
    server = listen(host, port)
    try:
        result = {}
        t = threading.Thread(target=lambda: result.setdefault("a", accept(server)))
        t.start()
        bob = connect(host, server.getsockname()[1])
        t.join()
        return result["a"], bob
    finally:
        server.close()
