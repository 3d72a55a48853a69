"""Deterministic report emission.

Every payload is rounded to 12 significant digits, serialized with sorted
keys, and terminated with a single newline, so one (input, configuration,
seed) triple maps to one byte sequence no matter how many worker threads
produced the numbers. Anything wall-clock dependent (timing, progress)
belongs on stderr and never inside a payload.
"""

from __future__ import annotations

import csv
import io
import json
import sys
from contextlib import contextmanager
from typing import Any, Iterable, Sequence

import numpy as np

from .errors import DomainError

SIGNIFICANT_DIGITS = 12
CLAMP_TOL = 1e-9


def round_value(x: float) -> float:
    """Round to 12 significant digits via the shortest decimal form."""
    return float(f"{x:.{SIGNIFICANT_DIGITS}g}")


def round_floats(obj: Any) -> Any:
    """Recursively round floats inside dicts, lists, tuples, arrays."""
    if isinstance(obj, (bool, int, str)) or obj is None:
        return obj
    if isinstance(obj, (float, np.floating)):
        return round_value(float(obj))
    if isinstance(obj, np.integer):
        return int(obj)
    if isinstance(obj, np.ndarray):
        return round_floats(obj.tolist())
    if isinstance(obj, dict):
        return {k: round_floats(v) for k, v in obj.items()}
    if isinstance(obj, (list, tuple)):
        return [round_floats(v) for v in obj]
    raise TypeError(f"cannot serialize {type(obj).__name__}")


def clamp_unit(values, *, what: str) -> np.ndarray:
    """Clamp round-off excursions into [0, 1], warning on stderr.

    Excursions beyond CLAMP_TOL are real domain violations and raise.
    """
    arr = np.asarray(values, dtype=np.float64).copy()
    low = float(arr.min(initial=0.0))
    high = float(arr.max(initial=1.0))
    if low < -CLAMP_TOL or high > 1.0 + CLAMP_TOL:
        raise DomainError(
            f"{what} outside [0, 1] beyond round-off: range [{low!r}, {high!r}]"
        )
    if low < 0.0 or high > 1.0:
        warn(f"clamped {what} into [0, 1] (round-off up to {max(-low, high - 1.0):.3g})")
        np.clip(arr, 0.0, 1.0, out=arr)
    return arr


def warn(message: str) -> None:
    print(f"warning: {message}", file=sys.stderr)


def json_text(payload: dict) -> str:
    return json.dumps(round_floats(payload), sort_keys=True, indent=2) + "\n"


def write_json(payload: dict, sink) -> None:
    sink.write(json_text(payload))


def write_csv(header: Sequence[str], rows: Iterable[Sequence], sink) -> None:
    writer = csv.writer(sink, lineterminator="\n")
    writer.writerow(header)
    for row in rows:
        writer.writerow([_cell(v) for v in row])


def _cell(value) -> str:
    if isinstance(value, (float, np.floating)):
        return f"{float(value):.{SIGNIFICANT_DIGITS}g}"
    if isinstance(value, (bool, np.bool_)):
        return "1" if value else "0"
    if isinstance(value, np.integer):
        return str(int(value))
    return str(value)


@contextmanager
def open_sink(path: str | None):
    """Text sink for '-'/None (stdout) or a filesystem path."""
    if path is None or path == "-":
        yield sys.stdout
    else:
        handle = open(path, "w", encoding="utf-8", newline="")
        try:
            yield handle
        finally:
            handle.close()


def render(payload: dict, fmt: str, sink, table=None) -> None:
    """Emit payload as JSON, or as CSV when a (header, rows) table is given."""
    if fmt == "json":
        write_json(payload, sink)
        return
    if fmt == "csv":
        if table is None:
            raise DomainError("this report has no tabular form; use --format json")
        header, rows = table
        write_csv(header, rows, sink)
        return
    raise DomainError(f"unknown format {fmt!r}")


def render_to_string(payload: dict, fmt: str, table=None) -> str:
    buffer = io.StringIO()
    render(payload, fmt, buffer, table)
    return buffer.getvalue()
