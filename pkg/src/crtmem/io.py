"""CSV and text serialization for calibration, Mermin and QPT artifacts.

Numbers are written in shortest round-trip form (``repr`` of a float), so a
file parsed back yields bit-identical arrays.  Every CSV has a header row;
the first column holds the row label.
"""

from __future__ import annotations

import csv
import hashlib
import io
import json
from pathlib import Path
from typing import Sequence

import numpy as np

from .calibration import LAMBDAS, CalibrationTable, check_column_stochastic, lambda_label, lambda_words, outcome_labels
from .qcore import pauli_words


def fmt(x: float) -> str:
    return repr(float(x))


def _write_rows(path: Path, header: Sequence[str], rows: Sequence[Sequence]) -> None:
    buf = io.StringIO()
    w = csv.writer(buf, lineterminator="\n")
    w.writerow(header)
    for row in rows:
        w.writerow([c if isinstance(c, str) else fmt(c) for c in row])
    Path(path).write_text(buf.getvalue())


def write_table(path, corner: str, row_labels, col_labels, values) -> None:
    values = np.asarray(values, dtype=float)
    if values.shape != (len(row_labels), len(col_labels)):
        raise ValueError(f"table shape {values.shape} does not match labels")
    _write_rows(path, [corner, *col_labels], [[r, *v] for r, v in zip(row_labels, values)])


def read_table(path) -> tuple[str, list[str], list[str], np.ndarray]:
    """Returns (corner label, row labels, column labels, values)."""
    with open(path, newline="") as fh:
        rows = list(csv.reader(fh))
    if not rows:
        raise ValueError(f"{path}: empty file")
    header, body = rows[0], rows[1:]
    if any(len(r) != len(header) for r in body):
        raise ValueError(f"{path}: ragged rows")
    values = np.array([[float(c) for c in r[1:]] for r in body], dtype=float).reshape(len(body), len(header) - 1)
    return header[0], [r[0] for r in body], header[1:], values


def write_stochastic(path, M: np.ndarray) -> None:
    """One row per prepared state x', columns are observed outcomes x."""
    M = np.asarray(M, dtype=float)
    n = int(round(np.log2(M.shape[0])))
    labels = outcome_labels(n)
    write_table(path, "prepared", labels, labels, M.T)


def read_stochastic(path, tol: float = 1e-10) -> np.ndarray:
    _, rows, cols, values = read_table(path)
    if rows != cols:
        raise ValueError(f"{path}: row and column labels differ")
    return check_column_stochastic(values.T, tol=tol)


def write_L(path, L: np.ndarray) -> None:
    write_table(path, "lambda", LAMBDAS, LAMBDAS, L)


def read_L(path, tol: float = 1e-10) -> np.ndarray:
    _, rows, cols, L = read_table(path)
    if tuple(rows) != LAMBDAS or tuple(cols) != LAMBDAS or L.shape != (4, 4):
        raise ValueError(f"{path}: not an L matrix")
    if np.max(np.abs(L.sum(axis=1) - 1)) > tol:
        raise ValueError(f"{path}: L rows do not sum to 1")
    return L


def write_calibration_table(path, table: CalibrationTable) -> None:
    labels = [lambda_label(w) for w in lambda_words(table.n)]
    write_table(path, "lambda", labels, outcome_labels(table.n), table.probs)


def read_calibration_table(path) -> CalibrationTable:
    _, rows, cols, probs = read_table(path)
    n = len(cols[0]) if cols else 0
    if [lambda_label(w) for w in lambda_words(n)] != rows:
        raise ValueError(f"{path}: lambda words out of order")
    return CalibrationTable(n, probs)


def write_ptm(path, ptm: np.ndarray) -> None:
    ptm = np.asarray(ptm, dtype=float)
    n = int(round(np.log(ptm.shape[0]) / np.log(4)))
    words = pauli_words(n)
    write_table(path, "sigma", words, words, ptm)


def read_ptm(path, tol: float = 1e-6) -> np.ndarray:
    _, rows, cols, ptm = read_table(path)
    if rows != cols or rows != pauli_words(len(rows[0])):
        raise ValueError(f"{path}: not a Pauli transfer matrix")
    first = np.zeros(ptm.shape[0])
    first[0] = 1
    if np.max(np.abs(ptm[0] - first)) > tol:
        raise ValueError(f"{path}: first row is not (1, 0, ..., 0)")
    return ptm


def write_columns(path, header: Sequence[str], rows: Sequence[Sequence]) -> None:
    _write_rows(path, header, rows)


def write_json(path, obj) -> None:
    Path(path).write_text(json.dumps(obj, indent=2, sort_keys=True, allow_nan=False) + "\n")


def sha256(path) -> str:
    return hashlib.sha256(Path(path).read_bytes()).hexdigest()
