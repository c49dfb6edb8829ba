"""Scripted fake X client and server speaking core-protocol framing.

They exist to drive the relay and decoder with known traffic: the server
answers reply-bearing requests after a configurable per-opcode delay, the
client issues a script of requests and waits for each reply.
"""

from __future__ import annotations

import socket
import struct
import threading
import time
from typing import Mapping, Sequence

from . import protocol as xp

AUTH_NAME = b"MIT-MAGIC-COOKIE-1"


def _recv_exact(sock: socket.socket, n: int) -> bytes:
    buf = bytearray()
    while len(buf) < n:
        chunk = sock.recv(n - len(buf))
        if not chunk:
            raise ConnectionError("peer closed")
        buf += chunk
    return bytes(buf)


class FakeXServer:
    """Minimal display server: setup handshake, then replies after delays.

    ``reply_delays`` maps opcode to seconds. QueryFont replies carry a small
    body, ListFontsWithInfo answers with ``info_replies`` font replies plus
    the terminator, and MapWindow triggers an Expose event.
    """

    def __init__(self, reply_delays: Mapping[int, float] | None = None, default_delay: float = 0.0,
                 host: str = "127.0.0.1", info_replies: int = 2):
        self.reply_delays = dict(reply_delays or {})
        self.default_delay = default_delay
        self.info_replies = info_replies
        self.sock = socket.create_server((host, 0))
        self.requests_seen = 0
        self._stop = False
        threading.Thread(target=self._accept, daemon=True).start()

    @property
    def address(self) -> tuple[str, int]:
        return self.sock.getsockname()[:2]

    def _accept(self):
        while not self._stop:
            try:
                conn, _ = self.sock.accept()
            except OSError:
                return
            threading.Thread(target=self._serve, args=(conn,), daemon=True).start()

    def _serve(self, conn: socket.socket):
        conn.setsockopt(socket.IPPROTO_TCP, socket.TCP_NODELAY, 1)
        try:
            with conn:
                head = _recv_exact(conn, 12)
                order = head[0]
                e = xp.BYTE_ORDERS[order]
                n_name, n_data = struct.unpack_from(e + "HH", head, 6)
                _recv_exact(conn, xp.pad4(n_name) + xp.pad4(n_data))
                conn.sendall(xp.setup_reply(order))
                seq = 0
                while True:
                    try:
                        hdr = conn.recv(4, socket.MSG_WAITALL)
                    except OSError:
                        return
                    if len(hdr) < 4:
                        return
                    opcode, _, units = struct.unpack(e + "BBH", hdr)
                    if units > 1:
                        _recv_exact(conn, 4 * (units - 1))
                    seq = (seq + 1) & 0xFFFF
                    self.requests_seen += 1
                    self._answer(conn, order, opcode, seq)
        except (ConnectionError, OSError):
            return

    def _answer(self, conn, order, opcode, seq):
        if opcode == 8:
            conn.sendall(xp.event(12, seq, order=order))
        if opcode not in xp.REPLY_OPCODES:
            return
        delay = self.reply_delays.get(opcode, self.default_delay)
        if delay:
            time.sleep(delay)
        if opcode == xp.QUERY_FONT:
            conn.sendall(xp.reply(seq, b"\0" * 28, order=order))
        elif opcode == xp.LIST_FONTS_WITH_INFO:
            out = b"".join(xp.reply(seq, b"\0" * 28 + b"font", detail=4, order=order)
                           for _ in range(self.info_replies))
            conn.sendall(out + xp.reply(seq, b"\0" * 28, detail=0, order=order))
        else:
            conn.sendall(xp.reply(seq, order=order))

    def close(self):
        self._stop = True
        self.sock.close()


class FakeXClient:
    def __init__(self, address: tuple[str, int], order: int = xp.LSB_FIRST,
                 auth_data: bytes = b"\x5a" * 16):
        self.order = order
        self.sock = socket.create_connection(address)
        self.sock.setsockopt(socket.IPPROTO_TCP, socket.TCP_NODELAY, 1)
        self.sequence = 0
        self.events = 0
        self.sock.sendall(xp.setup_request(order, AUTH_NAME, auth_data))
        e = xp.BYTE_ORDERS[order]
        head = _recv_exact(self.sock, 8)
        _recv_exact(self.sock, 4 * struct.unpack_from(e + "H", head, 6)[0])
        if head[0] != 1:
            raise ConnectionError(f"setup refused (status {head[0]})")

    def send(self, opcode: int, body: bytes = b"", detail: int = 0) -> int:
        self.sock.sendall(xp.request(opcode, body, detail, self.order))
        self.sequence = (self.sequence + 1) & 0xFFFF
        return self.sequence

    def read_reply(self, sequence: int) -> bytes:
        """Read server messages until the reply (or error) for ``sequence``."""
        e = xp.BYTE_ORDERS[self.order]
        while True:
            msg = _recv_exact(self.sock, 32)
            code = msg[0]
            seq = struct.unpack_from(e + "H", msg, 2)[0]
            if code == xp.REPLY:
                msg += _recv_exact(self.sock, 4 * struct.unpack_from(e + "I", msg, 4)[0])
            elif code != xp.ERROR:
                self.events += 1
                continue
            if seq == sequence:
                return msg

    def call(self, opcode: int, body: bytes = b"", detail: int = 0) -> bytes | None:
        """Send one request; wait for its reply if the opcode has one."""
        seq = self.send(opcode, body, detail)
        if opcode not in xp.REPLY_OPCODES:
            return None
        if opcode == xp.LIST_FONTS_WITH_INFO:
            while True:
                msg = self.read_reply(seq)
                if msg[0] != xp.REPLY or msg[1] == 0:
                    return msg
        return self.read_reply(seq)

    def run_script(self, script: Sequence[int | tuple[int, bytes]]) -> None:
        for step in script:
            opcode, body = (step, b"") if isinstance(step, int) else step
            self.call(opcode, body)

    def close(self):
        try:
            self.sock.shutdown(socket.SHUT_WR)
            while self.sock.recv(65536):
                pass
        except OSError:
            pass
        self.sock.close()
