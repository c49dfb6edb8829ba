"""Raw relay capture files.

Layout (little-endian): the magic ``XFT1`` followed by records of::

    timestamp_us: u64   microseconds since capture start
    direction:    u8    0 = client->server, 1 = server->client
    length:       u32
    payload:      length bytes
"""

from __future__ import annotations

import io
import os
import struct
import threading
import time
from dataclasses import dataclass
from typing import BinaryIO, Iterable

MAGIC = b"XFT1"
RECORD = struct.Struct("<QBI")
C2S, S2C = 0, 1
DIRECTIONS = {C2S: "c2s", S2C: "s2c"}


class CaptureFormatError(ValueError):
    pass


@dataclass(frozen=True)
class CaptureRecord:
    timestamp: int
    direction: int
    data: bytes


class CaptureWriter:
    """Append-serialised capture sink shared by a session's two copy loops."""

    def __init__(self, fh: BinaryIO, clock=time.monotonic_ns, flush_each: bool = False):
        self.fh = fh
        self._clock = clock
        self._start = clock()
        self._lock = threading.Lock()
        self.flush_each = flush_each
        self.records = 0
        self.closed = False
        fh.write(MAGIC)

    @classmethod
    def open(cls, path: str | os.PathLike, **kw) -> "CaptureWriter":
        return cls(open(path, "wb"), **kw)

    def now(self) -> int:
        return (self._clock() - self._start) // 1000

    def append(self, direction: int, data: bytes, timestamp: int | None = None) -> int:
        if direction not in DIRECTIONS:
            raise ValueError(f"bad direction {direction}")
        with self._lock:
            # stamping under the lock keeps file order and time order the same
            ts = self.now() if timestamp is None else timestamp
            if self.closed:
                raise ValueError("capture is closed")
            self.fh.write(RECORD.pack(ts, direction, len(data)))
            self.fh.write(data)
            if self.flush_each:
                self.fh.flush()
            self.records += 1
        return ts

    def close(self) -> None:
        with self._lock:
            if self.closed:
                return
            self.closed = True
            try:
                self.fh.flush()
            finally:
                if not isinstance(self.fh, io.BytesIO):
                    self.fh.close()


def dump_records(records: Iterable[CaptureRecord]) -> bytes:
    out = [MAGIC]
    for r in records:
        out.append(RECORD.pack(r.timestamp, r.direction, len(r.data)))
        out.append(r.data)
    return b"".join(out)


def parse_capture(blob: bytes) -> tuple[list[CaptureRecord], bool]:
    """Return the records and whether the file ended mid-record."""
    if blob[:4] != MAGIC:
        raise CaptureFormatError("not a capture file (bad magic)")
    records, pos = [], 4
    while pos < len(blob):
        if pos + RECORD.size > len(blob):
            return records, True
        ts, direction, length = RECORD.unpack_from(blob, pos)
        pos += RECORD.size
        if direction not in DIRECTIONS:
            raise CaptureFormatError(f"bad direction byte {direction} at offset {pos - 9}")
        if pos + length > len(blob):
            return records, True
        records.append(CaptureRecord(ts, direction, bytes(blob[pos:pos + length])))
        pos += length
    return records, False


def read_capture(path: str | os.PathLike) -> tuple[list[CaptureRecord], bool]:
    with open(path, "rb") as fh:
        return parse_capture(fh.read())
