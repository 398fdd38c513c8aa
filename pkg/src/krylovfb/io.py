"""JSON persistence for matrices, polynomials, systems, results and reports.

Each file is one JSON object with a ``"kind"`` tag. Floats are written with
Python's shortest round-trip representation, so ``read(write(x)) == x``
bit for bit. Readers validate the whole document before building anything
and raise :class:`ParseError` with the offending line, column or field.
"""

import json
from pathlib import Path

import numpy as np

from .exceptions import DomainError, ParseError, ShapeError
from .feedback import FeedbackSystem

KINDS = ("matrix", "polynomial", "system", "result", "report")


def _default(obj):
    if isinstance(obj, np.ndarray):
        return obj.tolist()
    if isinstance(obj, np.generic):
        return obj.item()
    if isinstance(obj, tuple):
        return list(obj)
    raise TypeError(f"cannot serialize {type(obj).__name__}")


def dumps(kind, payload):
    if kind not in KINDS:
        raise ValueError(f"unknown kind {kind!r}")
    return json.dumps({"kind": kind, **payload}, default=_default, indent=1, allow_nan=True) + "\n"


def loads(text, kind=None):
    """Parse a document, checking its ``kind`` tag when ``kind`` is given."""
    try:
        doc = json.loads(text)
    except json.JSONDecodeError as exc:
        raise ParseError(exc.msg, line=exc.lineno, column=exc.colno) from None
    if not isinstance(doc, dict) or "kind" not in doc:
        raise ParseError("document must be an object with a 'kind' field", field="kind")
    if kind is not None and doc["kind"] != kind:
        raise ParseError(f"expected kind {kind!r}, found {doc['kind']!r}", field="kind")
    return doc


def _field(doc, name):
    if name not in doc:
        raise ParseError(f"missing field {name!r}", field=name)
    return doc[name]


def _matrix(doc, name, shape=None):
    raw = _field(doc, name)
    try:
        arr = np.array(raw, dtype=float)
    except (TypeError, ValueError):
        raise ParseError(f"field {name!r} is not a rectangular numeric array", field=name) from None
    if arr.ndim == 1 and arr.size == 0 and shape is not None:
        arr = arr.reshape(shape)
    if arr.ndim != 2:
        raise ParseError(f"field {name!r} must be a 2-D array", field=name)
    if shape is not None and arr.shape != tuple(shape):
        raise ParseError(f"field {name!r} has shape {arr.shape}, declared {tuple(shape)}", field=name)
    return arr


def _vector(doc, name):
    raw = _field(doc, name)
    try:
        arr = np.array(raw, dtype=float)
    except (TypeError, ValueError):
        raise ParseError(f"field {name!r} is not a numeric array", field=name) from None
    if arr.ndim != 1:
        raise ParseError(f"field {name!r} must be a 1-D array", field=name)
    return arr


def _shape(doc, name):
    raw = _field(doc, name)
    if not (isinstance(raw, list) and len(raw) == 2 and all(isinstance(x, int) and x >= 0 for x in raw)):
        raise ParseError(f"field {name!r} must be a pair of nonnegative integers", field=name)
    return tuple(raw)


# matrices -------------------------------------------------------------------


def matrix_to_str(M):
    M = np.asarray(M, dtype=float)
    return dumps("matrix", {"shape": list(M.shape), "data": M})


def matrix_from_str(text):
    doc = loads(text, "matrix")
    return _matrix(doc, "data", _shape(doc, "shape"))


# polynomials ----------------------------------------------------------------


def poly_to_str(d):
    d = np.asarray(d, dtype=float)
    return dumps("polynomial", {"degree": int(d.shape[0] - 1), "coefficients": d})


def poly_from_str(text):
    doc = loads(text, "polynomial")
    d = _vector(doc, "coefficients")
    deg = _field(doc, "degree")
    if deg != d.shape[0] - 1:
        raise ParseError(f"degree {deg} does not match {d.shape[0]} coefficients", field="degree")
    if d.shape[0] == 0 or d[0] != 1.0:
        raise ParseError("polynomial must be monic", field="coefficients")
    return d


# systems --------------------------------------------------------------------


def system_to_str(sys, **extra):
    """Serialize ``(A, B, C)`` plus optional named arrays (target, planted K, ...)."""
    payload = {"n": sys.n, "m": sys.m, "p": sys.p, "A": sys.A, "B": sys.B, "C": sys.C}
    payload.update({k: v for k, v in extra.items() if v is not None})
    return dumps("system", payload)


def system_from_str(text, validate=True):
    """Return ``(FeedbackSystem, extras)`` where extras holds any other fields."""
    doc = loads(text, "system")
    dims = {}
    for k in ("n", "m", "p"):
        v = _field(doc, k)
        if not isinstance(v, int) or v < 1:
            raise ParseError(f"field {k!r} must be a positive integer", field=k)
        dims[k] = v
    n, m, p = dims["n"], dims["m"], dims["p"]
    A = _matrix(doc, "A", (n, n))
    B = _matrix(doc, "B", (n, m))
    C = _matrix(doc, "C", (p, n))
    try:
        sys = FeedbackSystem(A, B, C, validate=validate)
    except (DomainError, ShapeError) as exc:
        raise ParseError(str(exc), field="A/B/C") from None
    extras = {}
    for k, v in doc.items():
        if k in ("kind", "n", "m", "p", "A", "B", "C"):
            continue
        extras[k] = np.array(v, dtype=float) if isinstance(v, list) else v
    return sys, extras


# results and reports ----------------------------------------------------------


def result_to_str(payload):
    return dumps("result", payload)


def report_to_str(report):
    return dumps("report", report.to_dict() if hasattr(report, "to_dict") else report)


def document_from_str(text):
    """Any document as a plain dict (used by ``verify``)."""
    return loads(text)


def write(path, text):
    Path(path).write_text(text, encoding="utf-8")


def read(path):
    try:
        return Path(path).read_text(encoding="utf-8")
    except OSError as exc:
        raise ParseError(f"cannot read {path}: {exc.strerror}") from None
