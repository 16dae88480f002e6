"""Deterministic CSV output.

Floats use ``repr`` (shortest round-trip form) so identical runs give
byte-identical files.  Every file starts with one ``#`` comment line
carrying the tool version, the config hash and the master seed, followed by
the header row.
"""
from __future__ import annotations

import csv
import hashlib
import io
import json
import math
from pathlib import Path

import numpy as np

from . import __version__
from .errors import IoFailure


def fmt(value) -> str:
    if value is None:
        return ""
    if isinstance(value, (bool, np.bool_)):
        return "1" if value else "0"
    if isinstance(value, (int, np.integer)):
        return str(int(value))
    if isinstance(value, (complex, np.complexfloating)):
        value = complex(value)
        return f"{fmt(value.real)}{'+' if value.imag >= 0 or math.isnan(value.imag) else '-'}{fmt(abs(value.imag))}j"
    if isinstance(value, (float, np.floating)):
        return repr(float(value))
    return str(value)


def config_hash(config) -> str:
    blob = json.dumps(config, sort_keys=True, separators=(",", ":"), default=str)
    return hashlib.sha256(blob.encode()).hexdigest()[:16]


def render(header, rows, meta: dict) -> str:
    buf = io.StringIO()
    comment = " ".join(f"{k}={v}" for k, v in meta.items())
    buf.write(f"# urnsync {__version__} {comment}\n")
    writer = csv.writer(buf, lineterminator="\n")
    writer.writerow(header)
    for row in rows:
        writer.writerow([fmt(v) for v in row])
    return buf.getvalue()


def write_csv(path, header, rows, meta: dict) -> Path:
    path = Path(path)
    text = render(header, rows, meta)
    try:
        path.parent.mkdir(parents=True, exist_ok=True)
        path.write_text(text)
    except OSError as exc:
        raise IoFailure(f"cannot write {path}: {exc}") from exc
    return path


def read_csv(path):
    """Return ``(comment, header, rows)`` with rows as lists of strings."""
    lines = Path(path).read_text().splitlines()
    comment = lines[0]
    reader = csv.reader(lines[1:])
    header = next(reader)
    return comment, header, list(reader)
