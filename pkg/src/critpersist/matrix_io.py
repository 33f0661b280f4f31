"""Plain-text matrix and subspace files.

Operator file: first line ``n``, then n rows of n reals.
Subspace file: first line ``n k``, then n rows of k reals (the basis).
Values are written with 17 significant digits, which round-trips doubles.
"""

from __future__ import annotations

from pathlib import Path

import numpy as np

from .grassmann import Subspace
from .spectral_core import SymOperator


def _format_rows(A: np.ndarray) -> list[str]:
    return [" ".join(repr(float(v)) for v in row) for row in A]


def _read_rows(lines: list[str], rows: int, cols: int, path) -> np.ndarray:
    body = [ln.split() for ln in lines[1:1 + rows]]
    if len(body) != rows or any(len(r) != cols for r in body):
        raise ValueError(f"{path}: expected {rows} rows of {cols} values")
    return np.array(body, dtype=float).reshape(rows, cols)


def write_operator(path, op) -> None:
    A = op.entries if isinstance(op, SymOperator) else np.asarray(op, dtype=float)
    Path(path).write_text("\n".join([str(A.shape[0]), *_format_rows(A)]) + "\n")


def read_operator(path) -> SymOperator:
    lines = Path(path).read_text().splitlines()
    if not lines:
        raise ValueError(f"{path}: empty matrix file")
    n = int(lines[0].split()[0])
    return SymOperator(_read_rows(lines, n, n, path))


def write_subspace(path, V: Subspace) -> None:
    n, k = V.basis.shape
    Path(path).write_text("\n".join([f"{n} {k}", *_format_rows(V.basis)]) + "\n")


def read_subspace(path) -> Subspace:
    # keep empty rows: a zero subspace is written as n blank lines
    lines = Path(path).read_text().split("\n")
    n, k = (int(t) for t in lines[0].split())
    return Subspace(_read_rows(lines, n, k, path))
