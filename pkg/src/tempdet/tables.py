"""Columnar text tables: a header row of names, then numeric rows.

Numbers are written with repr-style shortest float formatting, so a
write/parse round trip reproduces every value bit for bit. Fields are
whitespace-delimited; column names must therefore not contain spaces.
"""
from __future__ import annotations

import math
from dataclasses import dataclass

import numpy as np

from .errors import InputError


@dataclass(frozen=True)
class Table:
    columns: tuple[str, ...]
    rows: tuple[tuple[float, ...], ...]

    def __post_init__(self) -> None:
        if not self.columns:
            raise InputError("a table needs at least one column")
        for name in self.columns:
            if not name or any(ch.isspace() for ch in name):
                raise InputError(f"bad column name {name!r}")
        width = len(self.columns)
        for i, row in enumerate(self.rows):
            if len(row) != width:
                raise InputError(
                    f"row {i} has {len(row)} fields, expected {width}"
                )

    def column(self, name: str) -> np.ndarray:
        try:
            idx = self.columns.index(name)
        except ValueError:
            raise InputError(f"no column named {name!r}") from None
        return np.array([row[idx] for row in self.rows], dtype=float)

    def to_text(self) -> str:
        cells = [list(self.columns)]
        for row in self.rows:
            cells.append([_format_float(v) for v in row])
        widths = [max(len(r[j]) for r in cells) for j in range(len(self.columns))]
        lines = []
        for r in cells:
            lines.append("  ".join(v.rjust(w) for v, w in zip(r, widths)).rstrip())
        return "\n".join(lines) + "\n"

    @classmethod
    def from_text(cls, text: str) -> "Table":
        lines = [ln for ln in text.splitlines() if ln.strip()]
        if not lines:
            raise InputError("empty table text")
        columns = tuple(lines[0].split())
        rows = []
        for n, line in enumerate(lines[1:], start=2):
            fields = line.split()
            if len(fields) != len(columns):
                raise InputError(
                    f"line {n}: {len(fields)} fields, expected {len(columns)}"
                )
            try:
                rows.append(tuple(float(f) for f in fields))
            except ValueError as exc:
                raise InputError(f"line {n}: {exc}") from None
        return cls(columns=columns, rows=tuple(rows))

    def to_document(self) -> dict:
        return {"columns": list(self.columns),
                "rows": [list(row) for row in self.rows]}


def _format_float(value: float) -> str:
    value = float(value)
    if math.isnan(value):
        return "nan"
    if math.isinf(value):
        return "inf" if value > 0 else "-inf"
    return repr(value)


def write_table(path: str, table: Table) -> None:
    with open(path, "w", encoding="utf-8") as fh:
        fh.write(table.to_text())


def read_table(path: str) -> Table:
    with open(path, "r", encoding="utf-8") as fh:
        return Table.from_text(fh.read())
