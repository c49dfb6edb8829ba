"""Offline X11 framing decoder for relay captures.

Each direction is reassembled into one byte stream and framed on its own:
the client side starts with the connection setup request and then carries
requests; the server side starts with the setup reply and then carries
replies, events and errors. A message is stamped with the capture time of
the read that delivered its last byte, which makes the result independent
of how the streams were chunked into reads.
"""

from __future__ import annotations

import bisect
import struct
from dataclasses import dataclass, field
from typing import Iterable

from . import protocol as xp
from .capture import C2S, S2C, CaptureRecord

DIGEST_BYTES = 64
MAX_REPLY_BYTES = 1 << 28

KINDS = ("setup-request", "setup-reply", "request", "reply", "event", "error")


class DecodeError(ValueError):
    def __init__(self, message: str, direction: str | None = None, offset: int | None = None,
                 partial: "DecodeResult | None" = None):
        where = f" ({direction} offset {offset})" if offset is not None else ""
        super().__init__(message + where)
        self.direction = direction
        self.offset = offset
        self.partial = partial


@dataclass(frozen=True)
class X11Message:
    timestamp: int
    direction: str
    kind: str
    code: int
    sequence: int | None
    byte_length: int
    offset: int
    digest: bytes

    @property
    def detail(self) -> int:
        return self.digest[1] if len(self.digest) > 1 else 0

    @property
    def name(self) -> str:
        if self.kind == "request":
            return xp.request_name(self.code)
        if self.kind == "event":
            return xp.EVENT_NAMES.get(self.code & 0x7F, f"Event{self.code & 0x7F}")
        if self.kind == "error":
            return xp.ERROR_NAMES.get(self.detail, f"Error{self.detail}")
        return self.kind

    def to_json(self) -> dict:
        return {
            "timestamp": self.timestamp,
            "direction": self.direction,
            "kind": self.kind,
            "opcode_or_code": self.code,
            "name": self.name,
            "sequence": self.sequence,
            "byte_length": self.byte_length,
            "payload_digest": self.digest.hex(),
        }


@dataclass
class DecodeResult:
    messages: list[X11Message] = field(default_factory=list)
    byte_order: str | None = None
    problems: list[str] = field(default_factory=list)
    stream_bytes: dict[str, int] = field(default_factory=dict)

    @property
    def requests(self) -> list[X11Message]:
        return [m for m in self.messages if m.kind == "request"]


class _Stream:
    def __init__(self, name: str, records: list[CaptureRecord]):
        self.name = name
        self.data = b"".join(r.data for r in records)
        self.ends, self.stamps = [], []
        end = 0
        for r in records:
            if r.data:
                end += len(r.data)
                self.ends.append(end)
                self.stamps.append(r.timestamp)

    def stamp(self, last_byte: int) -> int:
        return self.stamps[bisect.bisect_right(self.ends, last_byte)]


def decode(records: Iterable[CaptureRecord], full_payload: bool = False) -> DecodeResult:
    """Frame a capture into X11 messages, ordered by capture time.

    Raises :class:`DecodeError` for an unknown byte-order byte or a
    desynchronised stream; the messages decoded so far ride along on the
    exception as ``partial``. A truncated trailing message is only noted in
    ``problems``.
    """
    records = list(records)
    client = _Stream("c2s", [r for r in records if r.direction == C2S])
    server = _Stream("s2c", [r for r in records if r.direction == S2C])
    result = DecodeResult(stream_bytes={"c2s": len(client.data), "s2c": len(server.data)})
    limit = None if full_payload else DIGEST_BYTES
    if not client.data:
        if server.data:
            result.problems.append("server bytes without a client setup request")
        return result

    order_byte = client.data[0]
    if order_byte not in xp.BYTE_ORDERS:
        raise DecodeError(f"unknown byte-order byte 0x{order_byte:02x}", "c2s", 0, result)
    e = xp.BYTE_ORDERS[order_byte]
    result.byte_order = "msb-first" if order_byte == xp.MSB_FIRST else "lsb-first"

    out: list[X11Message] = []
    failure = None
    # a desync in one direction still leaves the other worth framing
    for framer, stream in ((_decode_client, client), (_decode_server, server)):
        try:
            framer(stream, e, limit, out, result.problems)
        except DecodeError as exc:
            failure = failure or exc
    result.messages = _ordered(out)
    if failure is not None:
        failure.partial = result
        raise failure
    return result


def _ordered(msgs: list[X11Message]) -> list[X11Message]:
    return sorted(msgs, key=lambda m: (m.timestamp, m.direction != "c2s", m.offset))


def _digest(data: bytes, pos: int, length: int, limit: int | None) -> bytes:
    n = length if limit is None else min(length, limit)
    return bytes(data[pos:pos + n])


def _decode_client(s: _Stream, e: str, limit, out: list, problems: list) -> None:
    data, pos = s.data, 0
    if len(data) < 12:
        problems.append(f"c2s: truncated setup request at offset 0 ({len(data)} of 12 bytes)")
        return
    n_name, n_data = struct.unpack_from(e + "HH", data, 6)
    total = 12 + xp.pad4(n_name) + xp.pad4(n_data)
    if total > len(data):
        problems.append(f"c2s: truncated setup request at offset 0 ({len(data)} of {total} bytes)")
        return
    # authorization bytes are relayed but never retained
    out.append(X11Message(s.stamp(total - 1), "c2s", "setup-request", data[0], None, total, 0,
                          bytes(data[:12])))
    pos = total
    seq = 0
    while pos < len(data):
        if pos + 4 > len(data):
            problems.append(f"c2s: truncated request header at offset {pos}")
            return
        opcode, units = data[pos], struct.unpack_from(e + "H", data, pos + 2)[0]
        if opcode == 0:
            raise DecodeError("request opcode 0 (stream desynchronised)", "c2s", pos)
        if units == 0:
            problems.append(f"c2s: big-request (length 0) at offset {pos} is unsupported; "
                            f"stopped decoding client stream")
            return
        length = 4 * units
        if pos + length > len(data):
            problems.append(f"c2s: truncated request at offset {pos} "
                            f"({len(data) - pos} of {length} bytes)")
            return
        seq = (seq + 1) & 0xFFFF
        out.append(X11Message(s.stamp(pos + length - 1), "c2s", "request", opcode, seq, length,
                              pos, _digest(data, pos, length, limit)))
        pos += length


def _decode_server(s: _Stream, e: str, limit, out: list, problems: list) -> None:
    data, pos = s.data, 0
    if not data:
        return
    if len(data) < 8:
        problems.append(f"s2c: truncated setup reply at offset 0 ({len(data)} of 8 bytes)")
        return
    units = struct.unpack_from(e + "H", data, 6)[0]
    total = 8 + 4 * units
    if total > len(data):
        problems.append(f"s2c: truncated setup reply at offset 0 ({len(data)} of {total} bytes)")
        return
    out.append(X11Message(s.stamp(total - 1), "s2c", "setup-reply", data[0], None, total, 0,
                          _digest(data, 0, total, limit)))
    pos = total
    last_seq = None
    while pos < len(data):
        if pos + 32 > len(data):
            problems.append(f"s2c: truncated message at offset {pos} ({len(data) - pos} of 32 bytes)")
            return
        code = data[pos]
        seq = struct.unpack_from(e + "H", data, pos + 2)[0]
        length = 32
        if code == xp.REPLY:
            kind = "reply"
            length += 4 * struct.unpack_from(e + "I", data, pos + 4)[0]
        elif code == xp.ERROR:
            kind = "error"
        else:
            kind = "event"
            if code & 0x7F == xp.GENERIC_EVENT:
                length += 4 * struct.unpack_from(e + "I", data, pos + 4)[0]
            elif code & 0x7F == xp.KEYMAP_NOTIFY:
                seq = None
        if length > MAX_REPLY_BYTES:
            raise DecodeError(f"implausible {kind} length {length}", "s2c", pos)
        if seq is not None:
            if last_seq is not None and ((seq - last_seq) & 0xFFFF) > 0x8000:
                raise DecodeError(f"sequence went backwards ({last_seq} -> {seq})", "s2c", pos)
            last_seq = seq
        if pos + length > len(data):
            problems.append(f"s2c: truncated {kind} at offset {pos} "
                            f"({len(data) - pos} of {length} bytes)")
            return
        out.append(X11Message(s.stamp(pos + length - 1), "s2c", kind, code, seq, length, pos,
                              _digest(data, pos, length, limit)))
        pos += length


def encode_header(msg: X11Message, byte_order: str) -> bytes:
    """Re-serialise the framing fields of a decoded message."""
    e = ">" if byte_order == "msb-first" else "<"
    if msg.kind == "setup-request":
        return msg.digest[:12]
    if msg.kind == "setup-reply":
        return msg.digest[:2] + msg.digest[2:6] + struct.pack(e + "H", (msg.byte_length - 8) // 4)
    if msg.kind == "request":
        return struct.pack(e + "BBH", msg.code, msg.detail, msg.byte_length // 4)
    seq = msg.sequence if msg.sequence is not None else struct.unpack_from(e + "H", msg.digest, 2)[0]
    head = struct.pack(e + "BBH", msg.code, msg.detail, seq)
    if msg.kind == "reply" or (msg.kind == "event" and msg.code & 0x7F == xp.GENERIC_EVENT):
        head += struct.pack(e + "I", (msg.byte_length - 32) // 4)
    return head
