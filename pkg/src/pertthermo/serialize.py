"""Deterministic CSV and JSON writers.

CSV dialect: comma separated, ``.`` decimal point, scientific notation with a
fixed number of significant digits, LF line endings and a header row.
"""

from __future__ import annotations

import csv
import json
import math
from pathlib import Path

import numpy as np

from .errors import IoFailure


def format_number(x, precision=17):
    x = float(x) + 0.0  # fold -0.0 into 0.0
    if not math.isfinite(x):
        return repr(x)
    return f"{x:.{precision - 1}e}"


def csv_text(columns, precision=17):
    """Render ``{name: 1-D array}`` (insertion order) as CSV text."""
    names = list(columns)
    arrays = [np.asarray(columns[n], dtype=float) for n in names]
    lengths = {len(a) for a in arrays}
    if len(lengths) > 1:
        raise ValueError(f"columns differ in length: {sorted(lengths)}")
    lines = [",".join(names)]
    for row in zip(*arrays):
        lines.append(",".join(format_number(v, precision) for v in row))
    return "\n".join(lines) + "\n"


def _write(path, text):
    path = Path(path)
    try:
        path.parent.mkdir(parents=True, exist_ok=True)
        with open(path, "w", encoding="utf-8", newline="\n") as fh:
            fh.write(text)
    except OSError as exc:
        raise IoFailure(f"cannot write: {exc.strerror}", key=str(path)) from None
    return path


def write_csv(path, columns, precision=17):
    return _write(path, csv_text(columns, precision))


def read_csv(path):
    """Parse a CSV written by :func:`write_csv` into ``{name: float array}``."""
    with open(path, newline="", encoding="utf-8") as fh:
        reader = csv.reader(fh)
        header = next(reader)
        rows = [[float(v) for v in r] for r in reader]
    data = np.array(rows, dtype=float).reshape(len(rows), len(header))
    return {name: data[:, j] for j, name in enumerate(header)}


def _jsonable(obj):
    if isinstance(obj, dict):
        return {str(k): _jsonable(v) for k, v in obj.items()}
    if isinstance(obj, (list, tuple)):
        return [_jsonable(v) for v in obj]
    if isinstance(obj, np.ndarray):
        return _jsonable(obj.tolist())
    if isinstance(obj, (np.floating, float)):
        v = float(obj)
        return v if math.isfinite(v) else None
    if isinstance(obj, np.integer):
        return int(obj)
    if isinstance(obj, np.bool_):
        return bool(obj)
    return obj


def json_text(obj):
    return json.dumps(_jsonable(obj), indent=2, sort_keys=False, allow_nan=False) + "\n"


def write_json(path, obj):
    return _write(path, json_text(obj))
