"""CSV and JSON serialization for complex matrices and reports."""

from __future__ import annotations

import csv
import dataclasses
import json
from pathlib import Path
from typing import Any, Iterable, Sequence

import numpy as np

__all__ = [
    "format_complex",
    "parse_complex",
    "write_complex_csv",
    "read_complex_csv",
    "write_table_csv",
    "to_jsonable",
    "write_json",
]


def _float(x: float) -> str:
    # shortest repr that round-trips exactly
    return repr(float(x))


def format_complex(z: complex) -> str:
    z = complex(z)
    return f"{_float(z.real)},{_float(z.imag)}"


def parse_complex(text: str) -> complex:
    re_txt, im_txt = text.split(",")
    return complex(float(re_txt), float(im_txt))


def write_complex_csv(path, M, header: Sequence[str] | None = None) -> Path:
    """Write a complex matrix, one line per row, entries ``re,im`` joined by ``;``.

    Lines starting with ``#`` are comments; ``header`` lines are written
    that way (config hash, seed).  Floats are written in their shortest
    exact form, so the matrix round-trips bit for bit.
    """
    path = Path(path)
    M = np.atleast_2d(np.asarray(getattr(M, "values", M), dtype=complex))
    with path.open("w", newline="\n") as fh:
        for line in header or ():
            fh.write(f"# {line}\n")
        for row in M:
            fh.write(";".join(format_complex(z) for z in row) + "\n")
    return path


def read_complex_csv(path) -> np.ndarray:
    rows = []
    with Path(path).open() as fh:
        for line in fh:
            line = line.strip()
            if not line or line.startswith("#"):
                continue
            rows.append([parse_complex(tok) for tok in line.split(";")])
    if len({len(r) for r in rows}) > 1:
        raise ValueError(f"{path}: ragged rows")
    return np.array(rows, dtype=complex)


def _cell(v) -> str:
    if isinstance(v, (bool, np.bool_)):
        return str(bool(v)).lower()
    if isinstance(v, (float, np.floating)):
        return _float(v)
    if isinstance(v, (int, np.integer)):
        return str(int(v))
    return str(v)


def write_table_csv(path, columns: Sequence[str], rows: Iterable[Sequence[Any]],
                    header: Sequence[str] | None = None) -> Path:
    """Plain real-valued table with a column header; deterministic formatting."""
    path = Path(path)
    with path.open("w", newline="") as fh:
        for line in header or ():
            fh.write(f"# {line}\n")
        w = csv.writer(fh, lineterminator="\n")
        w.writerow(columns)
        for r in rows:
            w.writerow([_cell(v) for v in r])
    return path


def to_jsonable(obj):
    """Recursively convert dataclasses, numpy scalars and arrays to JSON types.

    Complex numbers become ``[re, im]``; non-finite floats become strings.
    """
    if dataclasses.is_dataclass(obj) and not isinstance(obj, type):
        if hasattr(obj, "to_dict"):
            return to_jsonable(obj.to_dict())
        return {f.name: to_jsonable(getattr(obj, f.name)) for f in dataclasses.fields(obj)}
    if isinstance(obj, dict):
        return {str(k): to_jsonable(v) for k, v in obj.items()}
    if isinstance(obj, (list, tuple, set, frozenset)):
        return [to_jsonable(v) for v in obj]
    if isinstance(obj, np.ndarray):
        return to_jsonable(obj.tolist())
    if isinstance(obj, (bool, np.bool_)):
        return bool(obj)
    if isinstance(obj, (int, np.integer)):
        return int(obj)
    if isinstance(obj, (complex, np.complexfloating)):
        return [to_jsonable(obj.real), to_jsonable(obj.imag)]
    if isinstance(obj, (float, np.floating)):
        x = float(obj)
        return x if np.isfinite(x) else str(x)
    if isinstance(obj, Path):
        return str(obj)
    return obj


def write_json(path, obj) -> Path:
    path = Path(path)
    path.write_text(json.dumps(to_jsonable(obj), indent=2, sort_keys=True) + "\n")
    return path
