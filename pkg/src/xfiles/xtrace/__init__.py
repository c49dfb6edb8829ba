"""Interposing X11 tracer: relay, capture format, framing decoder, latency report."""

from .capture import CaptureRecord, CaptureWriter, parse_capture, read_capture
from .decode import DecodeError, DecodeResult, X11Message, decode
from .relay import OverheadResult, Relay, overhead_probe, relative_overhead
from .report import MatchResult, RequestLatency, TraceReport, font_report, match_latencies

__all__ = [
    "CaptureRecord", "CaptureWriter", "parse_capture", "read_capture",
    "DecodeError", "DecodeResult", "X11Message", "decode",
    "OverheadResult", "Relay", "overhead_probe", "relative_overhead",
    "MatchResult", "RequestLatency", "TraceReport", "font_report", "match_latencies",
]
