"""Minimal row/column table used for summary output."""

from __future__ import annotations

import math
from dataclasses import dataclass
from pathlib import Path
from typing import Sequence

from .data import format_float


def _cell(v) -> str:
    if isinstance(v, float):
        return "NA" if math.isnan(v) else format_float(v)
    return str(v)


@dataclass(frozen=True)
class Table:
    columns: tuple[str, ...]
    rows: tuple[tuple, ...]
    index_name: str = ""

    def __post_init__(self):
        object.__setattr__(self, "columns", tuple(self.columns))
        object.__setattr__(self, "rows", tuple(tuple(r) for r in self.rows))

    def column(self, name: str) -> list:
        j = self.columns.index(name)
        return [r[j] for r in self.rows]

    def row(self, key) -> dict:
        for r in self.rows:
            if r[0] == key:
                return dict(zip(self.columns, r))
        raise KeyError(key)

    def to_csv(self, path) -> None:
        path = Path(path)
        path.parent.mkdir(parents=True, exist_ok=True)
        with open(path, "w", encoding="utf-8", newline="\n") as fh:
            fh.write(",".join(self.columns) + "\n")
            for r in self.rows:
                fh.write(",".join(_cell(v) for v in r) + "\n")

    def __str__(self) -> str:
        cells = [list(self.columns)] + [[_cell(v) if not isinstance(v, float) or math.isnan(v)
                                         else f"{v:.4g}" for v in r] for r in self.rows]
        widths = [max(len(c[j]) for c in cells) for j in range(len(self.columns))]
        return "\n".join("  ".join(c[j].rjust(widths[j]) for j in range(len(widths))) for c in cells)


def make_table(columns: Sequence[str], rows: Sequence[Sequence]) -> Table:
    return Table(tuple(columns), tuple(tuple(r) for r in rows))
