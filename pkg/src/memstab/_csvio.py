"""Deterministic CSV output: header row, '.' decimal, 17 significant digits."""

import csv
import io
import math


def fmt(value) -> str:
    if isinstance(value, bool):
        return "true" if value else "false"
    if isinstance(value, int):
        return str(value)
    if isinstance(value, float):
        if math.isnan(value):
            return "nan"
        return format(value, ".17g")
    if value is None:
        return ""
    try:
        return format(float(value), ".17g")
    except (TypeError, ValueError):
        return str(value)


def write_rows(target, header, rows):
    """Write ``rows`` under ``header`` to a path, a text stream, or return a string if ``target`` is None."""
    if target is None:
        buf = io.StringIO()
        _emit(buf, header, rows)
        return buf.getvalue()
    if hasattr(target, "write"):
        _emit(target, header, rows)
        return None
    with open(target, "w", newline="") as fh:
        _emit(fh, header, rows)
    return None


def _emit(fh, header, rows):
    writer = csv.writer(fh, lineterminator="\n")
    writer.writerow(header)
    for row in rows:
        writer.writerow([fmt(v) for v in row])
