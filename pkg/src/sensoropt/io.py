"""Serialization helpers.

Matrices travel as ``{"rows": r, "cols": c, "data": [row-major floats]}`` in
JSON and as headerless comma-separated rows in CSV.  Floats are written with
``repr`` so that a write/read round trip is exact.
"""

import csv
import io
import json

import numpy as np

from .errors import DimensionError, InputError
from .isospectral import Projector


def matrix_to_json(M):
    M = np.array(M, dtype=float, ndmin=2)
    return {"rows": M.shape[0], "cols": M.shape[1],
            "data": [float(x) for x in M.ravel()]}


def matrix_from_json(obj, name="matrix"):
    """Accept the ``rows/cols/data`` form or a nested list of rows."""
    if isinstance(obj, dict):
        try:
            r, c, data = int(obj["rows"]), int(obj["cols"]), obj["data"]
        except (KeyError, TypeError, ValueError) as exc:
            raise InputError(f"{name}: expected keys rows, cols, data") from exc
        if len(data) != r * c:
            raise DimensionError(f"{name}: {len(data)} entries for a {r}x{c} matrix")
        return np.array(data, dtype=float).reshape(r, c)
    try:
        M = np.array(obj, dtype=float, ndmin=2)
    except (TypeError, ValueError) as exc:
        raise InputError(f"{name}: not a numeric matrix") from exc
    if M.ndim != 2:
        raise DimensionError(f"{name}: expected a 2-D matrix")
    return M


def matrix_to_csv(M):
    M = np.array(M, dtype=float, ndmin=2)
    return "".join(",".join(repr(float(x)) for x in row) + "\n" for row in M)


def matrix_from_csv(text):
    rows = [r for r in csv.reader(io.StringIO(text)) if r]
    if len({len(r) for r in rows}) > 1:
        raise DimensionError("ragged CSV matrix")
    return np.array(rows, dtype=float)


def projector_to_json(C):
    d = matrix_to_json(C.C)
    d.update(n=C.n, p=C.p)
    return d


def projector_from_json(obj):
    M = matrix_from_json(obj, "projector")
    return Projector(M, int(obj["p"]) if isinstance(obj, dict) and "p" in obj else -1)


def rows_to_csv(rows, header):
    """Render dict rows; floats with ``.12g`` for stable, readable output."""
    buf = io.StringIO()
    w = csv.writer(buf, lineterminator="\n")
    w.writerow(header)
    for row in rows:
        w.writerow([_fmt(row[h]) for h in header])
    return buf.getvalue()


def _fmt(v):
    if isinstance(v, (float, np.floating)):
        return format(float(v), ".12g")
    return str(v)


def dumps(obj):
    """Deterministic JSON with numpy values converted."""
    return json.dumps(obj, indent=2, sort_keys=True, default=_default) + "\n"


def _default(o):
    if isinstance(o, np.ndarray):
        return o.tolist()
    if isinstance(o, np.generic):
        return o.item()
    if isinstance(o, Projector):
        return projector_to_json(o)
    raise TypeError(f"cannot serialize {type(o).__name__}")
