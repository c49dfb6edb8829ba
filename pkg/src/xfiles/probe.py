"""Injection benchmark harness.

Probe commands are launched one after another on a fixed schedule and each
launch time is appended to a permanent tab-separated log::

    1999-06-01T18:22:00Z<TAB>appC<TAB>773.94<TAB>ok

Completion of a launch is the exit of the child process; a stub command
(``sleep 2``, a small script) stands in for a real application.
"""

from __future__ import annotations

import logging
import math
import os
import shlex
import signal
import subprocess
import time
from dataclasses import dataclass, field
from datetime import datetime, timedelta, timezone
from pathlib import Path
from typing import Callable, Iterable, TextIO

import numpy as np

log = logging.getLogger(__name__)

STATUSES = ("ok", "timeout", "fail")
DEFAULT_TIMEOUT = 600.0


class LogFormatError(ValueError):
    """A probe-log line does not have the four-field layout."""


class SystemClock:
    """Host clocks: monotonic for durations, UTC for timestamps."""

    def monotonic(self) -> float:
        return time.monotonic()

    def now(self) -> datetime:
        return datetime.now(timezone.utc)

    def sleep(self, seconds: float) -> None:
        time.sleep(seconds)


class ManualClock:
    """Virtual clock that only moves when told to (``advance`` or ``sleep``)."""

    def __init__(self, start: datetime | None = None):
        self.start = start or datetime(1999, 6, 1, 17, 0, tzinfo=timezone.utc)
        self.elapsed = 0.0
        self.sleeps: list[float] = []

    def monotonic(self) -> float:
        return self.elapsed

    def now(self) -> datetime:
        return self.start + timedelta(seconds=self.elapsed)

    def advance(self, seconds: float) -> None:
        if seconds < 0:
            raise ValueError("cannot move a clock backwards")
        self.elapsed += seconds

    def sleep(self, seconds: float) -> None:
        self.sleeps.append(seconds)
        self.advance(seconds)


class _AnchoredClock:
    # UTC timestamps derived from one anchor plus monotonic offsets, so a
    # wall-clock step during a run cannot make the log go backwards.
    def __init__(self, base):
        self.base = base
        self.anchor_utc = base.now()
        self.anchor_mono = base.monotonic()

    def monotonic(self) -> float:
        return self.base.monotonic()

    def now(self) -> datetime:
        return self.anchor_utc + timedelta(seconds=self.base.monotonic() - self.anchor_mono)

    def sleep(self, seconds: float) -> None:
        self.base.sleep(seconds)


SYSTEM_CLOCK = SystemClock()


@dataclass(frozen=True)
class ProbeSpec:
    name: str
    command: str
    timeout: float = DEFAULT_TIMEOUT
    order: int = 0

    def __post_init__(self):
        if not self.name or any(c.isspace() for c in self.name):
            raise ValueError(f"probe name must be a nonempty word, got {self.name!r}")
        if not self.timeout > 0:
            raise ValueError(f"probe {self.name}: timeout must be positive")

    @classmethod
    def parse(cls, text: str, order: int = 0) -> "ProbeSpec":
        """Parse the ``name=command[,timeout]`` form used on the command line."""
        name, sep, rest = text.partition("=")
        if not sep or not rest.strip():
            raise ValueError(f"probe must look like name=command,timeout: {text!r}")
        command, timeout = rest, DEFAULT_TIMEOUT
        head, comma, tail = rest.rpartition(",")
        if comma:
            try:
                timeout = float(tail)
                command = head
            except ValueError:
                pass
        return cls(name.strip(), command.strip(), timeout, order)


@dataclass(frozen=True)
class ProbeSample:
    timestamp: datetime
    app: str
    duration: float
    status: str = "ok"

    def __post_init__(self):
        if self.status not in STATUSES:
            raise ValueError(f"unknown status {self.status!r}")
        if not (self.duration >= 0 and math.isfinite(self.duration)):
            raise ValueError(f"duration must be finite and nonnegative, got {self.duration}")
        if self.timestamp.tzinfo is None:
            raise ValueError("timestamps must be timezone-aware")


@dataclass
class Schedule:
    interval: float
    probes: list[ProbeSpec]
    cycles: int | None = None  # None runs until interrupted

    def __post_init__(self):
        if not self.interval > 0:
            raise ValueError("interval must be positive")
        if not self.probes:
            raise ValueError("a schedule needs at least one probe")
        names = [p.name for p in self.probes]
        if len(set(names)) != len(names):
            raise ValueError(f"probe names must be unique: {names}")
        if self.cycles is not None and self.cycles < 0:
            raise ValueError("cycles must be >= 0")

    def ordered(self) -> list[ProbeSpec]:
        return sorted(self.probes, key=lambda p: p.order)


def format_timestamp(ts: datetime) -> str:
    ts = ts.astimezone(timezone.utc)
    if ts.microsecond:
        return ts.strftime("%Y-%m-%dT%H:%M:%S.%fZ")
    return ts.strftime("%Y-%m-%dT%H:%M:%SZ")


def parse_timestamp(text: str) -> datetime:
    if not text.endswith("Z"):
        raise ValueError(f"timestamp must be UTC with a Z suffix: {text!r}")
    return datetime.fromisoformat(text[:-1] + "+00:00").astimezone(timezone.utc)


def render_sample(sample: ProbeSample) -> str:
    return f"{format_timestamp(sample.timestamp)}\t{sample.app}\t{sample.duration:.2f}\t{sample.status}"


def parse_sample(line: str) -> ProbeSample:
    fields = line.rstrip("\r\n").split("\t")
    if len(fields) != 4:
        raise LogFormatError(f"expected 4 tab-separated fields, got {len(fields)}")
    stamp, app, duration, status = fields
    try:
        return ProbeSample(parse_timestamp(stamp), app, float(duration), status)
    except ValueError as exc:
        raise LogFormatError(str(exc)) from None


def render_log(samples: Iterable[ProbeSample]) -> str:
    return "".join(render_sample(s) + "\n" for s in samples)


def parse_log(lines: Iterable[str]) -> tuple[list[ProbeSample], list[tuple[int, str]]]:
    """Parse log lines, skipping bad ones.

    Returns the samples and a list of ``(line number, problem)`` diagnostics.
    Blank lines are ignored silently.
    """
    samples, problems = [], []
    for lineno, line in enumerate(lines, 1):
        if not line.strip():
            continue
        try:
            samples.append(parse_sample(line))
        except LogFormatError as exc:
            problems.append((lineno, str(exc)))
    return samples, problems


def read_log(path: str | os.PathLike) -> tuple[list[ProbeSample], list[tuple[int, str]]]:
    with open(path, encoding="utf-8") as fh:
        return parse_log(fh)


def run_probe(probe: ProbeSpec, clock=SYSTEM_CLOCK) -> ProbeSample:
    """Launch ``probe.command`` once and time it until the child exits."""
    stamp = clock.now()
    t0 = clock.monotonic()
    try:
        proc = subprocess.Popen(
            shlex.split(probe.command),
            stdin=subprocess.DEVNULL,
            stdout=subprocess.DEVNULL,
            stderr=subprocess.DEVNULL,
            start_new_session=True,
        )
    except (OSError, ValueError) as exc:
        log.warning("probe %s failed to start: %s", probe.name, exc)
        return ProbeSample(stamp, probe.name, max(0.0, clock.monotonic() - t0), "fail")

    try:
        rc = proc.wait(timeout=probe.timeout)
    except subprocess.TimeoutExpired:
        elapsed = clock.monotonic() - t0
        _kill(proc)
        log.warning("probe %s timed out after %.2fs", probe.name, probe.timeout)
        return ProbeSample(stamp, probe.name, min(max(elapsed, 0.0), probe.timeout), "timeout")

    elapsed = max(0.0, clock.monotonic() - t0)
    if rc != 0:
        log.warning("probe %s exited with status %s", probe.name, rc)
        return ProbeSample(stamp, probe.name, elapsed, "fail")
    return ProbeSample(stamp, probe.name, elapsed, "ok")


def _kill(proc: subprocess.Popen) -> None:
    try:
        os.killpg(proc.pid, signal.SIGKILL)
    except (ProcessLookupError, PermissionError):
        proc.kill()
    proc.wait()


def run_schedule(
    schedule: Schedule,
    sink: TextIO,
    clock=SYSTEM_CLOCK,
    runner: Callable[[ProbeSpec, object], ProbeSample] = run_probe,
) -> int:
    """Run probe cycles, appending every sample to ``sink`` as it completes.

    Cycle ``n`` starts no earlier than ``start + n * interval``; a cycle that
    overruns pushes the next one back and the log keeps the true start times.
    Write errors propagate immediately; lines already flushed stay in the log.
    """
    clock = _AnchoredClock(clock)
    probes = schedule.ordered()
    start = clock.monotonic()
    done = 0
    while schedule.cycles is None or done < schedule.cycles:
        wait = start + done * schedule.interval - clock.monotonic()
        if wait > 0:
            clock.sleep(wait)
        for probe in probes:
            sample = runner(probe, clock)
            sink.write(render_sample(sample) + "\n")
            sink.flush()
        done += 1
        log.info("cycle %d complete", done)
    return done


def synth_samples(
    shape: float,
    scale: float,
    n: int,
    seed: int | None = 0,
    app: str = "synth",
    start: datetime | None = None,
    step: float = 900.0,
) -> list[ProbeSample]:
    """Draw ``n`` gamma-distributed launch times at evenly spaced timestamps."""
    if not shape > 0 or not scale > 0:
        raise ValueError("gamma shape and scale must be positive")
    if n < 0:
        raise ValueError("n must be >= 0")
    start = start or datetime(1999, 6, 1, 17, 0, tzinfo=timezone.utc)
    durations = np.random.default_rng(seed).gamma(shape, scale, size=n)
    return [
        ProbeSample(start + timedelta(seconds=i * step), app, float(d))
        for i, d in enumerate(durations)
    ]


@dataclass
class ScheduleConfig:
    schedule: Schedule
    log: Path | None = None
    extra: dict[str, str] = field(default_factory=dict)


def parse_schedule_config(text: str) -> ScheduleConfig:
    """Parse a schedule file.

    One ``key = value`` pair per line, ``#`` starts a comment. Known keys are
    ``interval`` (seconds), ``cycles`` (integer or ``forever``), ``log`` (path)
    and ``probe`` (repeatable, ``name=command,timeout``). Probes run in the
    order they are listed.
    """
    interval, cycles, logpath = None, None, None
    probes: list[ProbeSpec] = []
    extra = {}
    for lineno, raw in enumerate(text.splitlines(), 1):
        line = raw.split("#", 1)[0].strip()
        if not line:
            continue
        key, sep, value = line.partition("=")
        key, value = key.strip(), value.strip()
        if not sep or not value:
            raise ValueError(f"line {lineno}: expected key = value")
        if key == "interval":
            interval = float(value)
        elif key == "cycles":
            cycles = None if value == "forever" else int(value)
        elif key == "log":
            logpath = Path(value)
        elif key == "probe":
            probes.append(ProbeSpec.parse(value, order=len(probes)))
        else:
            extra[key] = value
    if interval is None:
        raise ValueError("schedule file is missing 'interval'")
    return ScheduleConfig(Schedule(interval, probes, cycles), logpath, extra)
