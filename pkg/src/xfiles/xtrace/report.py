"""Request/reply latency matching and per-opcode attribution."""

from __future__ import annotations

from dataclasses import dataclass, field
from typing import Iterable, Sequence

from . import protocol as xp
from .decode import X11Message


@dataclass(frozen=True)
class RequestLatency:
    opcode: int
    sequence: int
    issue_time: int
    reply_time: int
    error: bool = False

    @property
    def latency(self) -> int:
        return self.reply_time - self.issue_time


@dataclass
class MatchResult:
    latencies: list[RequestLatency] = field(default_factory=list)
    unanswered: list[X11Message] = field(default_factory=list)
    orphans: list[X11Message] = field(default_factory=list)
    continuations: int = 0  # extra ListFontsWithInfo replies before the terminator


def match_latencies(messages: Iterable[X11Message]) -> MatchResult:
    """Join replies and errors to the outstanding request with the same sequence.

    Requests without a reply are normal in X11 and end up in ``unanswered``.
    ListFontsWithInfo answers with one reply per font and a terminating reply
    whose name length is zero; its latency runs to the terminator.
    """
    res = MatchResult()
    outstanding: dict[int, X11Message] = {}
    for m in messages:
        if m.kind == "request":
            stale = outstanding.pop(m.sequence, None)
            if stale is not None:
                res.unanswered.append(stale)
            outstanding[m.sequence] = m
        elif m.kind in ("reply", "error"):
            req = outstanding.get(m.sequence)
            if req is None:
                res.orphans.append(m)
                continue
            if m.kind == "reply" and req.code == xp.LIST_FONTS_WITH_INFO and m.detail != 0:
                res.continuations += 1
                continue
            del outstanding[m.sequence]
            res.latencies.append(RequestLatency(req.code, req.sequence, req.timestamp,
                                                m.timestamp, m.kind == "error"))
    res.unanswered.extend(outstanding.values())
    res.unanswered.sort(key=lambda m: (m.timestamp, m.offset))
    return res


@dataclass(frozen=True)
class OpcodeStats:
    opcode: int
    count: int
    matched: int
    total_latency: int

    @property
    def name(self) -> str:
        return xp.request_name(self.opcode)

    @property
    def mean_latency(self) -> float:
        return self.total_latency / self.matched if self.matched else 0.0


@dataclass(frozen=True)
class TraceReport:
    opcodes: tuple[OpcodeStats, ...]
    matched_latency: int
    font_latency: int
    font_share: float
    wall_time: int
    font_busy_time: int
    wall_share: float

    @property
    def requests(self) -> int:
        return sum(s.count for s in self.opcodes)


def _busy_time(intervals: list[tuple[int, int]]) -> int:
    busy, end = 0, None
    for a, b in sorted(intervals):
        if end is None or a > end:
            busy += b - a
            end = b
        elif b > end:
            busy += b - end
            end = b
    return busy


def font_report(messages: Sequence[X11Message], latencies: Sequence[RequestLatency],
                wall_time: int | None = None) -> TraceReport:
    """Aggregate request counts and matched latency per opcode.

    ``font_share`` is the font opcodes' fraction of all matched latency.
    ``wall_share`` is the fraction of ``wall_time`` (default: capture span)
    during which at least one font request was awaiting its reply.
    """
    counts: dict[int, int] = {}
    for m in messages:
        if m.kind == "request":
            counts[m.code] = counts.get(m.code, 0) + 1
    matched: dict[int, list[int]] = {}
    for lat in latencies:
        matched.setdefault(lat.opcode, []).append(lat.latency)
    stats = tuple(
        OpcodeStats(op, counts.get(op, 0), len(matched.get(op, [])), sum(matched.get(op, [])))
        for op in sorted(set(counts) | set(matched))
    )
    total = sum(s.total_latency for s in stats)
    font = sum(s.total_latency for s in stats if s.opcode in xp.FONT_OPCODES)
    if wall_time is None:
        stamps = [m.timestamp for m in messages]
        wall_time = max(stamps) - min(stamps) if stamps else 0
    busy = _busy_time([(l.issue_time, l.reply_time) for l in latencies
                       if l.opcode in xp.FONT_OPCODES])
    return TraceReport(
        stats, total, font,
        font / total if total else 0.0,
        wall_time, busy,
        min(1.0, busy / wall_time) if wall_time else 0.0,
    )


def render_report(report: TraceReport, match: MatchResult | None = None) -> str:
    lines = [f"{'Opcode':>6}  {'Request':<22}{'Count':>7}{'Matched':>9}"
             f"{'Total ms':>12}{'Mean ms':>10}"]
    for s in sorted(report.opcodes, key=lambda s: (-s.total_latency, s.opcode)):
        flag = "*" if s.opcode in xp.FONT_OPCODES else " "
        lines.append(f"{s.opcode:>6}{flag} {s.name:<22}{s.count:>7}{s.matched:>9}"
                     f"{s.total_latency / 1000:>12.3f}{s.mean_latency / 1000:>10.3f}")
    lines.append("")
    lines.append(f"requests: {report.requests}   matched latency: "
                 f"{report.matched_latency / 1000:.3f} ms")
    lines.append(f"font requests (*): {report.font_latency / 1000:.3f} ms = "
                 f"{100 * report.font_share:.1f}% of matched latency")
    lines.append(f"font busy time: {report.font_busy_time / 1000:.3f} ms = "
                 f"{100 * report.wall_share:.1f}% of {report.wall_time / 1000:.3f} ms wall time")
    if match is not None:
        lines.append(f"unanswered requests: {len(match.unanswered)}   "
                     f"orphan replies: {len(match.orphans)}")
    return "\n".join(lines) + "\n"
