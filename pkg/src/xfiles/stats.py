"""Launch-time statistics: moments, gamma fit, bucketed histogram, vfstat report."""

from __future__ import annotations

import math
import os
from dataclasses import dataclass
from datetime import datetime
from pathlib import Path
from typing import Iterable, Sequence

import numpy as np

from .probe import ProbeSample

AXIS_PERCENT = 50
AXIS_STEP = 5


class EmptyInputError(ValueError):
    pass


class VarianceUndefinedError(ValueError):
    pass


@dataclass(frozen=True)
class StatsSummary:
    n: int
    minm: float
    mean: float
    maxm: float
    mdev: float
    var: float
    sdev: float
    cov: float
    gam_a: float | None
    gam_b: float | None

    @property
    def long_tail(self) -> bool:
        return self.cov > 1.0

    @classmethod
    def from_moments(cls, n, minm, mean, maxm, var, mdev=float("nan")) -> "StatsSummary":
        """Build a summary from already-known moments (e.g. a published report)."""
        if var < 0:
            raise ValueError("variance must be nonnegative")
        sdev = math.sqrt(var)
        cov = sdev / mean if sdev > 0 else 0.0
        gam_a = gam_b = None
        if mean > 0 and var > 0:
            gam_a, gam_b = gamma_fit(mean, var)
        return cls(n, minm, mean, maxm, mdev, var, sdev, cov, gam_a, gam_b)


@dataclass(frozen=True)
class Bucket:
    lower: float
    upper: float
    count: int


@dataclass(frozen=True)
class Histogram:
    bucket_width: float
    buckets: tuple[Bucket, ...]

    @property
    def n(self) -> int:
        return sum(b.count for b in self.buckets)


@dataclass(frozen=True)
class TimeSeries:
    app: str
    points: tuple[tuple[datetime, float], ...]


def summarize(samples: Iterable[float]) -> StatsSummary:
    """Moment statistics with an n-1 sample variance.

    MDev is the median absolute deviation about the median.
    """
    x = np.asarray(list(samples), dtype=float)
    if x.size == 0:
        raise EmptyInputError("no samples to summarize")
    if not np.all(np.isfinite(x)) or np.any(x < 0):
        raise ValueError("durations must be finite and nonnegative")
    if x.size < 2:
        raise VarianceUndefinedError("sample variance needs at least 2 samples")
    minm, maxm = float(x.min()), float(x.max())
    mean = min(max(float(x.mean()), minm), maxm)
    var = float(x.var(ddof=1))
    med = float(np.median(x))
    mdev = float(np.median(np.abs(x - med)))
    return StatsSummary.from_moments(int(x.size), minm, mean, maxm, var, mdev)


def gamma_fit(mean: float, var: float) -> tuple[float, float]:
    """Method-of-moments gamma parameters ``(shape, scale)``."""
    if not mean > 0 or not var > 0:
        raise ValueError("gamma fit needs positive mean and variance")
    return mean * mean / var, var / mean


def histogram(samples: Iterable[float], bucket_width: float = 3.0) -> Histogram:
    """Bucket samples into ``[k*w, (k+1)*w)`` from zero up to the largest value.

    An empty input gives a single empty bucket.
    """
    if not bucket_width > 0:
        raise ValueError("bucket width must be positive")
    x = np.asarray(list(samples), dtype=float)
    if np.any(x < 0) or not np.all(np.isfinite(x)):
        raise ValueError("samples must be finite and nonnegative")
    idx = np.floor(x / bucket_width).astype(np.int64) if x.size else np.zeros(0, np.int64)
    # guard against x/w rounding up across an edge (e.g. 6.0/3 is fine, 0.3/0.1 is not)
    lower_edges = idx * bucket_width
    idx = np.where(lower_edges > x, idx - 1, idx)
    idx = np.where((idx + 1) * bucket_width <= x, idx + 1, idx)
    nb = int(idx.max()) + 1 if idx.size else 1
    counts = np.bincount(idx, minlength=nb)
    buckets = tuple(
        Bucket(k * bucket_width, (k + 1) * bucket_width, int(c)) for k, c in enumerate(counts)
    )
    return Histogram(bucket_width, buckets)


def _num(v: float) -> str:
    return f"{v:g}" if float(v).is_integer() else f"{v:.2f}".rstrip("0").rstrip(".")


def _label(bucket: Bucket, first: bool) -> str:
    if first:
        return f"< {_num(bucket.upper)}"
    return f"{_num(bucket.lower)}-{_num(bucket.upper):>2}"


def stars(count: int, n: int) -> int:
    """Whole percentage points of ``count/n``, rounded half up."""
    if n <= 0:
        return 0
    return (200 * count + n) // (2 * n)


def _fmt_opt(v: float | None, width: int) -> str:
    return f"{v:{width}.2f}" if v is not None else "n/a".rjust(width)


def render_vfstat(app: str, source: str, summary: StatsSummary, hist: Histogram) -> str:
    s = summary
    lines = [
        f'{app} Stats for {s.n} samples in "{source}"',
        "=====",
        f"Minm: {s.minm:6.2f}      Mean: {s.mean:6.2f}      Maxm: {s.maxm:7.2f}      MDev: {s.mdev:6.2f}",
        f"Var: {s.var:8.2f}     SDev: {s.sdev:6.2f}      COV: {s.cov:7.2f}",
        f"GamA: {_fmt_opt(s.gam_a, 6)}     GamB: {_fmt_opt(s.gam_b, 6)}",
    ]
    if s.long_tail:
        lines.append(f"Tail: long (COV {s.cov:.2f} > 1)")

    labels = [_label(b, i == 0) for i, b in enumerate(hist.buckets)]
    w = max([len("Secs")] + [len(l) for l in labels])
    ticks = "".join(f"{p}%".rjust(AXIS_STEP) for p in range(AXIS_STEP, AXIS_PERCENT + 1, AXIS_STEP))
    lines.append(f"{'Secs':>{w}} | {ticks}")
    rule = ["-"] * (AXIS_PERCENT + 1)
    for p in range(AXIS_STEP, AXIS_PERCENT + 1, AXIS_STEP):
        rule[p] = "+"
    lines.append("-" * (w + 1) + "+" + "".join(rule))

    total = hist.n
    for label, b in zip(labels, hist.buckets):
        k = stars(b.count, total)
        bar = "*" * min(k, AXIS_PERCENT) + (">" if k > AXIS_PERCENT else "")
        lines.append(f"{label:>{w}} | {bar}".rstrip())
    return "\n".join(lines) + "\n"


def vfstat(samples: Sequence[ProbeSample], app: str, source: str, bucket_width: float = 3.0,
           include_failed: bool = False) -> str:
    """Report for one application's samples taken from a probe log."""
    durations = [
        s.duration for s in samples
        if s.app == app and (include_failed or s.status == "ok")
    ]
    if not durations:
        raise EmptyInputError(f"no samples for {app!r}")
    return render_vfstat(app, source, summarize(durations), histogram(durations, bucket_width))


def split_series(samples: Iterable[ProbeSample]) -> list[TimeSeries]:
    """Group samples by app, keeping log order; apps appear in first-seen order."""
    groups: dict[str, list] = {}
    for s in samples:
        groups.setdefault(s.app, []).append((s.timestamp, s.duration))
    return [TimeSeries(app, tuple(points)) for app, points in groups.items()]


def _epoch(ts) -> str:
    v = ts.timestamp()
    return str(int(v)) if v.is_integer() else repr(v)


def render_series(series: TimeSeries) -> str:
    return "".join(f"{_epoch(t)} {d:.2f}\n" for t, d in series.points)


def write_series(series: Iterable[TimeSeries], outdir: str | os.PathLike) -> list[Path]:
    """Write one ``<app>.dat`` file of ``<epoch seconds> <duration>`` per series."""
    outdir = Path(outdir)
    outdir.mkdir(parents=True, exist_ok=True)
    written = []
    for ts in series:
        path = outdir / f"{ts.app}.dat"
        path.write_text(render_series(ts), encoding="utf-8")
        written.append(path)
    return written
