"""Small file and formatting helpers used by every module that writes output."""
from __future__ import annotations

import json
import os
import tempfile
from pathlib import Path


def fmt_float(v) -> str:
    """Shortest decimal string that round-trips the float64 exactly."""
    return repr(float(v))


def atomic_write_text(path, text: str) -> None:
    """Write via a temp file in the same directory, then rename into place.

    A crash mid-write leaves either the old file or nothing, never a
    truncated file.
    """
    path = Path(path)
    path.parent.mkdir(parents=True, exist_ok=True)
    fd, tmp = tempfile.mkstemp(dir=path.parent, prefix=path.name + ".", suffix=".tmp")
    try:
        with os.fdopen(fd, "w", encoding="utf-8", newline="\n") as fh:
            fh.write(text)
        os.replace(tmp, path)
    except BaseException:
        try:
            os.unlink(tmp)
        except OSError:
            pass
        raise


def dump_json(obj) -> str:
    """Deterministic JSON: sorted keys, no whitespace churn."""
    return json.dumps(obj, sort_keys=True, separators=(",", ":"))


def atomic_write_json(path, obj) -> None:
    atomic_write_text(path, dump_json(obj) + "\n")


def read_csv_rows(path) -> tuple[list[str], list[tuple[int, list[str]]], dict]:
    """Read a CSV written by this package.

    Returns (header, rows, meta): rows are (line_number, cells) pairs and
    meta holds anything parsed from leading ``# key: json`` comment lines.
    Raises ValueError with a line number on structural problems; callers
    wrap it in their own error type.
    """
    header: list[str] | None = None
    rows: list[tuple[int, list[str]]] = []
    meta: dict = {}
    with open(path, "r", encoding="utf-8") as fh:
        for lineno, raw in enumerate(fh, start=1):
            line = raw.rstrip("\n")
            if not line:
                continue
            if line.startswith("#"):
                body = line[1:].strip()
                if ":" in body:
                    key, _, payload = body.partition(":")
                    try:
                        meta[key.strip()] = json.loads(payload.strip())
                    except json.JSONDecodeError:
                        pass
                continue
            cells = line.split(",")
            if header is None:
                header = cells
                continue
            if len(cells) != len(header):
                raise ValueError(f"line {lineno}: expected {len(header)} fields, got {len(cells)}")
            rows.append((lineno, cells))
    if header is None:
        raise ValueError("line 1: no header row")
    return header, rows, meta
