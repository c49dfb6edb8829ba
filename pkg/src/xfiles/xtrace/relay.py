"""Interposing TCP relay that records X11 traffic.

The relay listens where the client expects an X display, opens its own
connection to the real server, and copies bytes both ways unchanged. Every
read is stamped on completion and appended to the session's capture.
"""

from __future__ import annotations

import io
import logging
import socket
import statistics
import threading
import time
from dataclasses import dataclass
from typing import Callable

from .capture import C2S, S2C, CaptureWriter

log = logging.getLogger(__name__)

BUFSIZE = 65536


def parse_endpoint(text: str) -> tuple[str, int]:
    host, sep, port = text.rpartition(":")
    if not sep:
        raise ValueError(f"endpoint must be HOST:PORT, got {text!r}")
    return host or "127.0.0.1", int(port)


def _nodelay(sock: socket.socket) -> None:
    try:
        sock.setsockopt(socket.IPPROTO_TCP, socket.TCP_NODELAY, 1)
    except OSError:
        pass


class Session:
    def __init__(self, client: socket.socket, upstream: tuple[str, int], capture: CaptureWriter,
                 connect_timeout: float = 10.0):
        self.client = client
        self.upstream_addr = upstream
        self.capture = capture
        self.connect_timeout = connect_timeout
        self.server: socket.socket | None = None
        self.error: str | None = None
        self.bytes = {C2S: 0, S2C: 0}
        self.done = threading.Event()
        self._threads: list[threading.Thread] = []

    def start(self) -> None:
        try:
            self.server = socket.create_connection(self.upstream_addr, self.connect_timeout)
            self.server.settimeout(None)
        except OSError as exc:
            self.error = f"upstream {self.upstream_addr[0]}:{self.upstream_addr[1]} unreachable: {exc}"
            log.error(self.error)
            self._close_all()
            self.done.set()
            return
        _nodelay(self.client)
        _nodelay(self.server)
        for src, dst, direction in ((self.client, self.server, C2S), (self.server, self.client, S2C)):
            t = threading.Thread(target=self._pump, args=(src, dst, direction), daemon=True)
            t.start()
            self._threads.append(t)
        threading.Thread(target=self._reap, daemon=True).start()

    def _pump(self, src: socket.socket, dst: socket.socket, direction: int) -> None:
        capture = self.capture
        while True:
            try:
                data = src.recv(BUFSIZE)
            except OSError:
                data = b""
            if not data:
                break
            # record before forwarding, so a peer's answer can never be
            # captured ahead of the bytes that provoked it
            try:
                capture.append(direction, data)
            except Exception as exc:  # noqa: BLE001 - any sink failure ends the session
                self.error = f"capture write failed: {exc}"
                log.error(self.error)
                self.abort()
                return
            try:
                dst.sendall(data)
            except OSError as exc:
                log.debug("send failed: %s", exc)
                self.abort()
                return
            self.bytes[direction] += len(data)
        try:
            dst.shutdown(socket.SHUT_WR)
        except OSError:
            pass

    def _reap(self) -> None:
        for t in self._threads:
            t.join()
        self._close_all()
        self.done.set()

    def _close_all(self) -> None:
        for s in (self.client, self.server):
            if s is not None:
                try:
                    s.close()
                except OSError:
                    pass
        try:
            self.capture.close()
        except Exception as exc:  # noqa: BLE001
            self.error = self.error or f"capture close failed: {exc}"

    def abort(self) -> None:
        for s in (self.client, self.server):
            if s is not None:
                try:
                    s.shutdown(socket.SHUT_RDWR)
                except OSError:
                    pass

    def wait(self, timeout: float | None = None) -> bool:
        return self.done.wait(timeout)


class Relay:
    """Accepts clients on ``listen`` and relays each to ``upstream``.

    ``capture_factory(index)`` returns the capture sink for the index-th
    session; the default keeps captures in memory.
    """

    def __init__(self, listen: tuple[str, int], upstream: tuple[str, int],
                 capture_factory: Callable[[int], CaptureWriter] | None = None,
                 max_sessions: int | None = None):
        self.upstream = upstream
        self.capture_factory = capture_factory or (lambda i: CaptureWriter(io.BytesIO()))
        self.max_sessions = max_sessions
        self.sessions: list[Session] = []
        self._sock = socket.create_server(listen)
        self._thread: threading.Thread | None = None
        self._closed = False

    @property
    def address(self) -> tuple[str, int]:
        return self._sock.getsockname()[:2]

    def start(self) -> "Relay":
        self._thread = threading.Thread(target=self.serve_forever, daemon=True)
        self._thread.start()
        return self

    def serve_forever(self) -> None:
        while not self._closed:
            if self.max_sessions is not None and len(self.sessions) >= self.max_sessions:
                break
            try:
                client, _ = self._sock.accept()
            except OSError:
                break
            session = Session(client, self.upstream, self.capture_factory(len(self.sessions)))
            self.sessions.append(session)
            session.start()

    def close(self) -> None:
        self._closed = True
        try:
            self._sock.close()
        except OSError:
            pass
        for s in self.sessions:
            s.abort()

    def __enter__(self):
        return self.start()

    def __exit__(self, *exc):
        self.close()


@dataclass(frozen=True)
class OverheadResult:
    direct_median: float
    interposed_median: float
    repetitions: int

    @property
    def ratio(self) -> float:
        return self.interposed_median / self.direct_median

    @property
    def overhead(self) -> float:
        return self.ratio - 1.0


def relative_overhead(direct: float, interposed: float) -> float:
    """Fractional extra latency of the relay; negative when noise favours it."""
    if not direct > 0:
        raise ValueError("direct round trip must be positive")
    return interposed / direct - 1.0


class _EchoServer:
    def __init__(self, payload_size: int, service_time: float):
        self.size = payload_size
        self.service_time = service_time
        self.sock = socket.create_server(("127.0.0.1", 0))
        threading.Thread(target=self._accept, daemon=True).start()

    def _accept(self):
        while True:
            try:
                conn, _ = self.sock.accept()
            except OSError:
                return
            threading.Thread(target=self._serve, args=(conn,), daemon=True).start()

    def _serve(self, conn):
        _nodelay(conn)
        with conn:
            while True:
                msg = _recv_exact(conn, self.size)
                if msg is None:
                    return
                if self.service_time:
                    time.sleep(self.service_time)
                conn.sendall(msg)

    def close(self):
        self.sock.close()


def _recv_exact(sock: socket.socket, n: int) -> bytes | None:
    buf = bytearray()
    while len(buf) < n:
        chunk = sock.recv(n - len(buf))
        if not chunk:
            return None
        buf += chunk
    return bytes(buf)


def overhead_probe(payload_size: int = 1024, repetitions: int = 500,
                   service_time: float = 0.0, warmup: int = 50) -> OverheadResult:
    """Median loopback round trip with and without the relay in the path.

    Direct and interposed round trips alternate so both see the same
    background load. ``service_time`` adds a fixed server-side delay per
    exchange, as a display server would.
    """
    if payload_size < 1 or repetitions < 1:
        raise ValueError("payload_size and repetitions must be positive")
    echo = _EchoServer(payload_size, service_time)
    relay = Relay(("127.0.0.1", 0), echo.sock.getsockname()[:2]).start()
    direct = socket.create_connection(echo.sock.getsockname()[:2])
    via = socket.create_connection(relay.address)
    _nodelay(direct)
    _nodelay(via)
    payload = bytes(range(256)) * (payload_size // 256 + 1)
    payload = payload[:payload_size]
    times = {id(direct): [], id(via): []}
    try:
        for i in range(warmup + repetitions):
            for s in (direct, via) if i % 2 else (via, direct):
                t0 = time.perf_counter()
                s.sendall(payload)
                if _recv_exact(s, payload_size) != payload:
                    raise RuntimeError("echo mismatch")
                if i >= warmup:
                    times[id(s)].append(time.perf_counter() - t0)
    finally:
        direct.close()
        via.close()
        relay.close()
        echo.close()
    return OverheadResult(statistics.median(times[id(direct)]),
                          statistics.median(times[id(via)]), repetitions)
