"""Logarithmic font-path latency model and font-path inventories.

Launch time against a font source with ``F`` fonts scales like ``log F``, so
relative to a baseline source measured at ``R_b`` with ``F_b`` fonts::

    R = R_b * log(F) / log(F_b)

The ratio of logarithms is independent of the base; base 10 is used so that
round font counts give exact ratios (1000 vs 100 fonts is exactly 1.5).
"""

from __future__ import annotations

import math
import os
from dataclasses import dataclass
from typing import Iterable, Sequence

KINDS = ("x-font-server", "nfs-mounted", "resident", "boot-filesystem")


@dataclass(frozen=True)
class FontModel:
    baseline_time: float
    baseline_fonts: int

    def __post_init__(self):
        if not self.baseline_time > 0:
            raise ValueError("baseline time must be positive")
        if not self.baseline_fonts > 1:
            raise ValueError("baseline font count must exceed 1")

    @classmethod
    def parse(cls, text: str) -> "FontModel":
        """Parse ``TIME:FONTS``, e.g. ``9.41:109``."""
        t, sep, f = text.partition(":")
        if not sep:
            raise ValueError(f"baseline must look like seconds:fonts, got {text!r}")
        return cls(float(t), int(f))


def log_ratio(fonts_a: int, fonts_b: int, base: float = 10.0) -> float:
    if fonts_a <= 1 or fonts_b <= 1:
        raise ValueError("font counts must exceed 1")
    if base == 10.0:
        return math.log10(fonts_a) / math.log10(fonts_b)
    return math.log(fonts_a, base) / math.log(fonts_b, base)


def predict(model: FontModel, fonts: int, base: float = 10.0) -> float:
    """Predicted launch time for a source holding ``fonts`` fonts."""
    if fonts <= 1:
        raise ValueError(f"font count must exceed 1, got {fonts}")
    return model.baseline_time * log_ratio(fonts, model.baseline_fonts, base)


def percent_error(model_time: float, measured_time: float) -> float:
    """Signed error relative to the model value; negative means the model underestimates."""
    if not model_time > 0:
        raise ValueError("model time must be positive")
    return 100.0 * (model_time - measured_time) / model_time


@dataclass(frozen=True)
class TableRow:
    label: str
    fonts: int
    measured: float
    baseline: bool = False


@dataclass(frozen=True)
class TableEntry:
    row: TableRow
    model: float | None = None
    error: float | None = None
    problem: str | None = None


def compare(model: FontModel, rows: Iterable[TableRow]) -> list[TableEntry]:
    out = []
    for row in rows:
        try:
            r = predict(model, row.fonts)
            err = None if row.baseline else percent_error(r, row.measured)
        except ValueError as exc:
            out.append(TableEntry(row, problem=str(exc)))
            continue
        out.append(TableEntry(row, r, err))
    return out


def table_report(model: FontModel, rows: Sequence[TableRow]) -> str:
    """Fixed-width model-versus-measurement table (Times, Fonts, Measure, Model, %Error)."""
    lines = [f"{'Times':<8}{'Fonts':>8}{'Measure':>10}{'Model':>10}{'%Error':>10}"]
    for e in compare(model, rows):
        r = e.row
        if e.problem:
            lines.append(f"{r.label:<8}{r.fonts:>8}{r.measured:>10.2f}  error: {e.problem}")
            continue
        err = "N/A" if e.error is None else f"{e.error:.2f}"
        lines.append(f"{r.label:<8}{r.fonts:>8}{r.measured:>10.2f}{e.model:>10.2f}{err:>10}")
    return "\n".join(lines) + "\n"


def parse_rows(lines: Iterable[str]) -> list[TableRow]:
    """Rows file: ``label<TAB>fonts<TAB>measured[<TAB>baseline]``; ``#`` comments."""
    rows = []
    for lineno, raw in enumerate(lines, 1):
        line = raw.split("#", 1)[0].strip()
        if not line:
            continue
        fields = line.split()
        if len(fields) not in (3, 4):
            raise ValueError(f"line {lineno}: expected label, fonts, measured[, baseline]")
        if len(fields) == 4 and fields[3] != "baseline":
            raise ValueError(f"line {lineno}: fourth field may only be 'baseline'")
        rows.append(TableRow(fields[0], int(fields[1]), float(fields[2]), len(fields) == 4))
    return rows


@dataclass(frozen=True)
class FontPath:
    path: str
    count: int
    kind: str

    def __post_init__(self):
        if self.count < 1:
            raise ValueError(f"{self.path}: font count must be at least 1")
        if self.kind not in KINDS:
            raise ValueError(f"{self.path}: unknown kind {self.kind!r}, expected one of {KINDS}")


@dataclass(frozen=True)
class FontPathInventory:
    elements: tuple[FontPath, ...]

    def __post_init__(self):
        paths = [e.path for e in self.elements]
        if len(set(paths)) != len(paths):
            raise ValueError("font path names must be unique")

    @classmethod
    def parse(cls, lines: Iterable[str]) -> "FontPathInventory":
        elements = []
        for lineno, raw in enumerate(lines, 1):
            line = raw.rstrip("\r\n")
            if not line.strip() or line.lstrip().startswith("#"):
                continue
            fields = line.split("\t")
            if len(fields) != 3:
                raise ValueError(f"line {lineno}: expected path<TAB>count<TAB>kind")
            elements.append(FontPath(fields[0], int(fields[1]), fields[2].strip()))
        return cls(tuple(elements))

    @classmethod
    def read(cls, path: str | os.PathLike) -> "FontPathInventory":
        with open(path, encoding="utf-8") as fh:
            return cls.parse(fh)

    def by_kind(self, kind: str) -> list[FontPath]:
        return [e for e in self.elements if e.kind == kind]


def inventory_total(inventory: FontPathInventory) -> int:
    return sum(e.count for e in inventory.elements)
