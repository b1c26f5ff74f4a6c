"""Delimited-text table helpers.

All data files are UTF-8, comma-delimited with a header row. Floats are
written with ``repr`` so that every load(export(x)) round-trips exactly.
"""

from __future__ import annotations

import csv
from collections.abc import Iterable, Iterator, Sequence
from pathlib import Path

from .errors import LoadError


def read_rows(
    path: str | Path,
    required: Sequence[str],
    optional: Sequence[str] = (),
) -> Iterator[tuple[int, dict[str, str]]]:
    """Yield (line_number, row dict) for every data row of a table.

    The header must contain every column in ``required``; columns in
    ``optional`` are allowed, anything else is rejected.
    """
    path = Path(path)
    try:
        handle = path.open(newline="", encoding="utf-8")
    except OSError as exc:
        raise LoadError(str(path), None, f"cannot open: {exc}") from exc
    with handle:
        reader = csv.reader(handle)
        try:
            header = next(reader)
        except StopIteration:
            raise LoadError(str(path), 1, "missing header row") from None
        header = [h.strip() for h in header]
        missing = [c for c in required if c not in header]
        unknown = [c for c in header if c not in required and c not in optional]
        if missing or unknown:
            parts = []
            if missing:
                parts.append(f"missing column(s) {missing}")
            if unknown:
                parts.append(f"unknown column(s) {unknown}")
            raise LoadError(str(path), 1, "; ".join(parts))
        for lineno, raw in enumerate(reader, start=2):
            if not raw or all(not cell.strip() for cell in raw):
                continue
            if len(raw) != len(header):
                raise LoadError(
                    str(path), lineno, f"expected {len(header)} fields, got {len(raw)}"
                )
            yield lineno, {h: cell.strip() for h, cell in zip(header, raw)}


def write_rows(
    path: str | Path, header: Sequence[str], rows: Iterable[Sequence[object]]
) -> None:
    """Write a table with a stable column order and round-trip-safe floats."""
    path = Path(path)
    path.parent.mkdir(parents=True, exist_ok=True)
    with path.open("w", newline="", encoding="utf-8") as handle:
        writer = csv.writer(handle, lineterminator="\n")
        writer.writerow(header)
        for row in rows:
            writer.writerow([format_cell(value) for value in row])


def format_cell(value: object) -> str:
    if isinstance(value, bool):
        return "1" if value else "0"
    if isinstance(value, float):
        return repr(value)
    if value is None:
        return ""
    return str(value)


def parse_float(path: str, lineno: int, column: str, text: str) -> float:
    try:
        value = float(text)
    except ValueError:
        raise LoadError(path, lineno, f"{column}: not a number: {text!r}") from None
    if value != value or value in (float("inf"), float("-inf")):
        raise LoadError(path, lineno, f"{column}: non-finite value {text!r}")
    return value


def parse_int(path: str, lineno: int, column: str, text: str) -> int:
    try:
        return int(text)
    except ValueError:
        raise LoadError(path, lineno, f"{column}: not an integer: {text!r}") from None
