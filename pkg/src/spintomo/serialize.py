"""Deterministic JSON text emission shared by the file formats.

All floats are printed with 17 significant digits, which round-trips every
IEEE-754 double exactly, so writing the same document twice produces
byte-identical files. Complex matrices are stored as row-major nested lists
of [re, im] pairs.
"""

from __future__ import annotations

import json
import math

import numpy as np


def format_float(x: float) -> str:
    """Render a finite double with 17 significant digits."""
    x = float(x)
    if not math.isfinite(x):
        raise ValueError(f"cannot serialize non-finite number {x!r}")
    return format(x, ".17g")


def _encode(obj) -> str:
    if isinstance(obj, dict):
        items = ",".join(f"{json.dumps(str(k))}:{_encode(v)}" for k, v in obj.items())
        return "{" + items + "}"
    if isinstance(obj, (list, tuple)) or isinstance(obj, np.ndarray):
        seq = obj.tolist() if isinstance(obj, np.ndarray) else obj
        return "[" + ",".join(_encode(v) for v in seq) + "]"
    if isinstance(obj, (bool, np.bool_)):
        return "true" if obj else "false"
    if isinstance(obj, (int, np.integer)):
        return str(int(obj))
    if isinstance(obj, (float, np.floating)):
        return format_float(obj)
    if obj is None:
        return "null"
    if isinstance(obj, str):
        return json.dumps(obj)
    raise TypeError(f"cannot serialize object of type {type(obj).__name__}")


def dumps(document: dict) -> str:
    """Serialize a document to compact deterministic JSON text."""
    return _encode(document) + "\n"


def dump_path(document: dict, path) -> None:
    with open(path, "w", encoding="utf-8", newline="\n") as fh:
        fh.write(dumps(document))


def matrix_to_pairs(mat: np.ndarray) -> list:
    """Complex matrix -> row-major nested [re, im] pairs."""
    mat = np.asarray(mat, dtype=complex)
    return [[[float(z.real), float(z.imag)] for z in row] for row in mat]


def pairs_to_matrix(rows, context: str = "matrix") -> np.ndarray:
    """Inverse of :func:`matrix_to_pairs`, with shape validation."""
    try:
        arr = np.asarray(rows, dtype=float)
    except (TypeError, ValueError) as exc:
        raise ValueError(f"{context}: entries must be [re, im] pairs") from exc
    if arr.ndim != 3 or arr.shape[2] != 2:
        raise ValueError(f"{context}: expected rows of [re, im] pairs")
    return arr[..., 0] + 1j * arr[..., 1]
