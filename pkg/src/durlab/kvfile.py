"""Flat ``key = value`` text files used for parameters, configs and metadata.

Vectors are comma separated; matrix rows are separated by ``;``.  Lines
starting with ``#`` are comments.
"""

from __future__ import annotations

from pathlib import Path
from typing import Mapping

import numpy as np

from .data import format_float
from .errors import ParseError


def parse_kv(text: str) -> dict[str, str]:
    out: dict[str, str] = {}
    for i, raw in enumerate(text.splitlines(), start=1):
        line = raw.strip()
        if not line or line.startswith("#"):
            continue
        if "=" not in line:
            raise ParseError(f"expected 'key = value', got {line!r}", i)
        key, value = (s.strip() for s in line.split("=", 1))
        if not key:
            raise ParseError("empty key", i)
        if key in out:
            raise ParseError(f"duplicate key {key!r}", i)
        out[key] = value
    return out


def read_kv(path) -> dict[str, str]:
    path = Path(path)
    if not path.is_file():
        raise ParseError(f"no such file: {path}")
    return parse_kv(path.read_text(encoding="utf-8"))


def format_value(v) -> str:
    if isinstance(v, (bool, np.bool_)):
        return "true" if v else "false"
    if isinstance(v, (int, np.integer)):
        return str(int(v))
    if isinstance(v, (float, np.floating)):
        return format_float(float(v))
    if isinstance(v, str):
        return v
    a = np.asarray(v, dtype=float)
    if a.ndim == 1:
        return ",".join(format_float(x) for x in a)
    if a.ndim == 2:
        return ";".join(",".join(format_float(x) for x in row) for row in a)
    return str(v)


def dump_kv(items: Mapping[str, object]) -> str:
    return "".join(f"{k} = {format_value(v)}\n" for k, v in items.items())


def write_kv(items: Mapping[str, object], path) -> None:
    path = Path(path)
    path.parent.mkdir(parents=True, exist_ok=True)
    with open(path, "w", encoding="utf-8", newline="\n") as fh:
        fh.write(dump_kv(items))


def to_float(s: str, key: str) -> float:
    try:
        return float(s)
    except ValueError:
        raise ParseError(f"{key}: not a number {s!r}") from None


def to_vector(s: str, key: str) -> np.ndarray:
    if s.strip() == "":
        return np.zeros(0)
    return np.array([to_float(x, key) for x in s.split(",")])


def to_matrix(s: str, key: str) -> np.ndarray:
    rows = [to_vector(r, key) for r in s.split(";")]
    if len({len(r) for r in rows}) != 1:
        raise ParseError(f"{key}: ragged matrix")
    return np.vstack(rows)
