"""Response-time load curves: exact MVA, asymptotic bounds, knee, exceedance, headroom.

Closed single-class network with service demands ``D_k`` and think time ``Z``:

* floor ``Rmin = sum(D)``
* high-load asymptote ``Rinf(n) = n * max(D) - Z``
* knee (optimal load) ``n* = (sum(D) + Z) / max(D)``
"""

from __future__ import annotations

import math
from dataclasses import dataclass, field
from typing import Iterable, Mapping, Sequence

import numpy as np

CAPACITIES = {"ethernet": 300.0, "fddi": 3000.0, "css": 12000.0}
DEFAULT_THRESHOLD_FACTOR = 1.25
DEFAULT_ESCALATION_FACTOR = 10.0


class DegenerateFitError(ValueError):
    pass


@dataclass(frozen=True)
class MvaModel:
    demands: tuple[float, ...]
    think_time: float = 0.0
    paging_threshold: int | None = None
    paging_penalty: float = 0.0

    def __post_init__(self):
        object.__setattr__(self, "demands", tuple(float(d) for d in self.demands))
        if not self.demands:
            raise ValueError("at least one service demand is required")
        if any(not d > 0 for d in self.demands):
            raise ValueError("service demands must be positive")
        if self.think_time < 0:
            raise ValueError("think time must be nonnegative")
        if self.paging_threshold is not None and self.paging_threshold < 0:
            raise ValueError("paging threshold must be nonnegative")
        if self.paging_penalty < 0:
            raise ValueError("paging penalty must be nonnegative")

    @property
    def total_demand(self) -> float:
        return math.fsum(self.demands)

    @property
    def d_max(self) -> float:
        return max(self.demands)


@dataclass(frozen=True)
class LoadCurve:
    points: tuple[tuple[int, float], ...]

    def __post_init__(self):
        pts = tuple((int(n), float(r)) for n, r in self.points)
        object.__setattr__(self, "points", pts)
        for (a, _), (b, _) in zip(pts, pts[1:]):
            if b <= a:
                raise ValueError("user counts must be strictly increasing")
        for n, r in pts:
            if n < 1 or not r > 0:
                raise ValueError(f"bad point ({n}, {r}): need n >= 1 and response > 0")

    @property
    def users(self) -> np.ndarray:
        return np.array([n for n, _ in self.points], dtype=float)

    @property
    def responses(self) -> np.ndarray:
        return np.array([r for _, r in self.points], dtype=float)

    def __len__(self):
        return len(self.points)

    @classmethod
    def parse(cls, lines: Iterable[str]) -> "LoadCurve":
        """Two whitespace-separated columns ``<n_users> <mean response>``; ``#`` comments."""
        pts = []
        for lineno, raw in enumerate(lines, 1):
            line = raw.split("#", 1)[0].strip()
            if not line:
                continue
            fields = line.split()
            if len(fields) < 2:
                raise ValueError(f"line {lineno}: expected '<n_users> <response>'")
            pts.append((int(fields[0]), float(fields[1])))
        return cls(tuple(pts))


@dataclass(frozen=True)
class MvaPoint:
    n: int
    response: float
    throughput: float
    queue: tuple[float, ...]


@dataclass(frozen=True)
class BoundsFit:
    r_min: float
    d_max: float
    z: float
    n_max: int | None = None

    def __post_init__(self):
        if not self.r_min > 0:
            raise ValueError("r_min must be positive")
        if not self.d_max > 0:
            raise ValueError("d_max must be positive")

    @property
    def n_opt(self) -> float:
        return (self.r_min + self.z) / self.d_max

    @classmethod
    def from_model(cls, model: MvaModel) -> "BoundsFit":
        return cls(model.total_demand, model.d_max, model.think_time)


@dataclass(frozen=True)
class Asymptotes:
    r_min: float
    d_max: float
    z: float

    def high_load(self, n: float) -> float:
        return n * self.d_max - self.z

    def bound(self, n: float) -> float:
        return max(self.r_min, self.high_load(n))


def mva(model: MvaModel, n_users: int) -> list[MvaPoint]:
    """Exact mean-value analysis for populations 1..n_users.

    A configured paging penalty is added to the response time after the
    recursion, for every population above the threshold; throughput is
    reported against the penalised response so ``X*(R+Z) == n`` holds.
    """
    if n_users < 1:
        raise ValueError("need at least one user")
    d = np.asarray(model.demands)
    q = np.zeros_like(d)
    out = []
    for n in range(1, n_users + 1):
        rk = d * (1.0 + q)
        r = math.fsum(rk)
        x = n / (r + model.think_time)
        q = x * rk
        if model.paging_threshold is not None and n > model.paging_threshold:
            r += model.paging_penalty * (n - model.paging_threshold)
        out.append(MvaPoint(n, r, n / (r + model.think_time), tuple(q)))
    return out


def mva_curve(model: MvaModel, n_users: int) -> LoadCurve:
    return LoadCurve(tuple((p.n, p.response) for p in mva(model, n_users)))


def asymptotes(source: MvaModel | BoundsFit) -> Asymptotes:
    if isinstance(source, MvaModel):
        return Asymptotes(source.total_demand, source.d_max, source.think_time)
    return Asymptotes(source.r_min, source.d_max, source.z)


def knee(fit: BoundsFit | Asymptotes) -> tuple[float, int]:
    """Optimal load where the high-load line meets the floor, as (real, floor int)."""
    if not fit.d_max > 0:
        raise ValueError("d_max must be positive")
    n_opt = (fit.r_min + fit.z) / fit.d_max
    return n_opt, int(math.floor(n_opt + 1e-9 * max(1.0, n_opt)))


def fit_bounds(
    curve: LoadCurve,
    z: float,
    tail_fraction: float = 0.3,
    exclude_from: int | None = None,
) -> BoundsFit:
    """Fit the floor and high-load slope of a measured curve.

    ``r_min`` is the response at the smallest population. ``d_max`` is the
    least-squares slope of response against population over the largest
    ``tail_fraction`` of the populations below ``exclude_from`` (points at or
    above an already-detected exceedance are left out). The asymptote's
    intercept is pinned at ``-z``, not fitted.
    """
    if len(curve) < 4:
        raise ValueError("need at least 4 points to fit bounds")
    if not 0 < tail_fraction <= 1:
        raise ValueError("tail_fraction must be in (0, 1]")
    n, r = curve.users, curve.responses
    keep = n < exclude_from if exclude_from is not None else np.ones_like(n, dtype=bool)
    n_fit, r_fit = n[keep], r[keep]
    k = max(2, math.ceil(tail_fraction * len(n_fit)))
    n_tail, r_tail = n_fit[-k:], r_fit[-k:]
    if len(n_tail) < 2 or np.ptp(n_tail) == 0:
        raise DegenerateFitError("tail window has no spread in population")
    slope = float(np.polyfit(n_tail, r_tail, 1)[0])
    scale = max(1.0, float(np.max(np.abs(r_tail))))
    if slope <= 1e-12 * scale:
        raise DegenerateFitError(f"tail slope {slope:g} shows no rising asymptote")
    return BoundsFit(float(r[0]), slope, z, exclude_from)


def find_exceedance(
    curve: LoadCurve,
    fit: BoundsFit | Asymptotes,
    threshold_factor: float = DEFAULT_THRESHOLD_FACTOR,
) -> int | None:
    """Smallest population at which the curve rises faster than the asymptote.

    A point ``n_k`` exceeds when it sits above the high-load line and the
    measured slope from the previous point is more than ``threshold_factor``
    times ``d_max``. An exact MVA curve never does this, since its increments
    are bounded by the bottleneck demand.
    """
    if threshold_factor < 1:
        raise ValueError("threshold_factor must be >= 1")
    pts = curve.points
    for (n0, r0), (n1, r1) in zip(pts, pts[1:]):
        line = n1 * fit.d_max - fit.z
        if line <= 0 or r1 <= line:
            continue
        if (r1 - r0) / (n1 - n0) > threshold_factor * fit.d_max:
            return n1
    return None


@dataclass
class LoadAnalysis:
    fit: BoundsFit
    knee: tuple[float, int]
    n_max: int | None
    notes: list[str] = field(default_factory=list)


def _first_consistent_cutoff(curve, z, tail_fraction, threshold_factor):
    """Smallest population c such that fitting below c flags c itself.

    A paging tail inflates a slope fitted over it, hiding the exceedance
    that produced it. Scanning cutoffs upward finds the onset instead.
    Cutoffs within twice the fitted knee are ignored: below that the MVA
    slope is still climbing toward d_max and looks like an excess.
    """
    for c, _ in curve.points[4:]:
        try:
            fit = fit_bounds(curve, z, tail_fraction, exclude_from=c)
        except ValueError:
            continue
        if c > 2 * fit.n_opt and find_exceedance(curve, fit, threshold_factor) == c:
            return c, fit
    return None, None


def analyze(
    curve: LoadCurve,
    z: float,
    tail_fraction: float = 0.3,
    threshold_factor: float = DEFAULT_THRESHOLD_FACTOR,
    exclude_from: int | None = None,
) -> LoadAnalysis:
    """Fit the bounds and locate the maximal load.

    With ``exclude_from`` the fit uses only smaller populations. Otherwise
    the exceedance onset is searched for, and the fit excludes it.
    """
    notes = []
    if exclude_from is not None:
        fit = fit_bounds(curve, z, tail_fraction, exclude_from)
        n_max = find_exceedance(curve, fit, threshold_factor)
    else:
        n_max, fit = _first_consistent_cutoff(curve, z, tail_fraction, threshold_factor)
        if fit is None:
            fit = fit_bounds(curve, z, tail_fraction)
            n_max = find_exceedance(curve, fit, threshold_factor)
            if n_max is not None:
                notes.append(f"exceedance at n={n_max} lies within twice the knee")
    fit = BoundsFit(fit.r_min, fit.d_max, fit.z, n_max)
    return LoadAnalysis(fit, knee(fit), n_max, notes)


def escalation_detect(
    series: Mapping[str, Sequence[tuple[float, float]]],
    factor: float = DEFAULT_ESCALATION_FACTOR,
) -> tuple[list[tuple[str, float]], list[str]]:
    """Flag ``(op, n)`` wherever an op's response jumps by ``factor`` or more
    between consecutive populations. Ops with fewer than 2 points are skipped
    and reported in the returned diagnostics."""
    if not factor > 1:
        raise ValueError("escalation factor must exceed 1")
    flags, notes = [], []
    for op, pts in series.items():
        if len(pts) < 2:
            notes.append(f"{op}: fewer than 2 points, skipped")
            continue
        for (_, r0), (n1, r1) in zip(pts, pts[1:]):
            if r0 > 0 and r1 / r0 >= factor:
                flags.append((op, n1))
    return flags, notes


@dataclass(frozen=True)
class Headroom:
    total: float
    capacity: float

    @property
    def utilization(self) -> float:
        return self.total / self.capacity


def nfs_headroom(call_rates: Iterable[tuple[str, float]], capacity: float) -> Headroom:
    if not capacity > 0:
        raise ValueError("capacity must be positive")
    rates = list(call_rates)
    for op, rate in rates:
        if rate < 0:
            raise ValueError(f"{op}: negative call rate")
    return Headroom(math.fsum(rate for _, rate in rates), float(capacity))


def parse_rates(lines: Iterable[str]) -> list[tuple[str, float]]:
    """``<op> <calls/sec>`` per line; a header line without a number is skipped."""
    out = []
    for lineno, raw in enumerate(lines, 1):
        line = raw.split("#", 1)[0].strip()
        if not line:
            continue
        fields = line.split()
        if len(fields) != 2:
            raise ValueError(f"line {lineno}: expected '<op> <calls/sec>'")
        try:
            out.append((fields[0], float(fields[1])))
        except ValueError:
            if out:
                raise ValueError(f"line {lineno}: bad rate {fields[1]!r}") from None
    return out


def parse_capacity(text: str) -> float:
    return CAPACITIES.get(text.lower()) or float(text)
