"""Readers and writers for the on-disk dataset formats.

Two matrix formats are supported and selected by file suffix:

* dense CSV: header row of gene/category ids with a leading id cell,
  one row per spot/cell, first column the row id;
* Matrix Market coordinate files (``.mtx``) with sidecar id lists,
  ``<name>.rows.txt`` and ``<name>.cols.txt``, one id per line.

Numbers in CSV files carry 17 significant digits, so a write/read round
trip reproduces every double bit-exactly.
"""

from __future__ import annotations

import csv
import warnings
from pathlib import Path

import numpy as np
import scipy.io
import scipy.sparse

from .errors import DotWarning, ParseError

FLOAT_FORMAT = "%.17g"


def _format(x: float) -> str:
    return FLOAT_FORMAT % x


def _sidecar_paths(path: Path):
    return path.with_suffix(".rows.txt"), path.with_suffix(".cols.txt")


def read_expression_matrix(path):
    """Read a matrix with ids; returns ``(values, row_ids, col_ids)``.

    Entries must be non-negative and ids unique; violations raise
    ``ParseError`` naming the offending line or id.
    """
    path = Path(path)
    if not path.exists():
        raise ParseError(f"{path}: file not found")
    if path.suffix == ".mtx":
        return _read_mtx(path)
    return _read_csv_matrix(path)


def _read_csv_matrix(path: Path):
    rows = []
    row_ids = []
    with path.open(newline="") as handle:
        reader = csv.reader(handle)
        try:
            header = next(reader)
        except StopIteration:
            raise ParseError(f"{path}: empty file") from None
        if len(header) < 2:
            raise ParseError(f"{path}: line 1: header must name at least one column")
        col_ids = [c.strip() for c in header[1:]]
        if len(set(col_ids)) != len(col_ids):
            raise ParseError(f"{path}: duplicate column ids in header")
        width = len(header)
        for lineno, record in enumerate(reader, start=2):
            if not record:
                continue
            if len(record) != width:
                raise ParseError(
                    f"{path}: line {lineno}: expected {width} fields, got {len(record)}"
                )
            row_ids.append(record[0].strip())
            try:
                values = [float(x) for x in record[1:]]
            except ValueError as exc:
                raise ParseError(f"{path}: line {lineno}: {exc}") from None
            for k, v in enumerate(values):
                if v < 0:
                    raise ParseError(
                        f"{path}: line {lineno}: negative value for row "
                        f"{record[0].strip()!r}, column {col_ids[k]!r}"
                    )
            rows.append(values)
    if len(set(row_ids)) != len(row_ids):
        raise ParseError(f"{path}: duplicate row ids")
    if not rows:
        raise ParseError(f"{path}: no data rows")
    return np.array(rows, dtype=float), row_ids, col_ids


def _read_mtx(path: Path):
    rows_path, cols_path = _sidecar_paths(path)
    for side in (rows_path, cols_path):
        if not side.exists():
            raise ParseError(f"{side}: sidecar id file not found")
    try:
        matrix = scipy.io.mmread(path)
    except Exception as exc:
        raise ParseError(f"{path}: {exc}") from None
    if scipy.sparse.issparse(matrix):
        matrix = matrix.toarray()
    matrix = np.asarray(matrix, dtype=float)
    if np.any(matrix < 0):
        raise ParseError(f"{path}: negative entries are not allowed")
    row_ids = [line.strip() for line in rows_path.read_text().splitlines() if line.strip()]
    col_ids = [line.strip() for line in cols_path.read_text().splitlines() if line.strip()]
    if len(row_ids) != matrix.shape[0] or len(col_ids) != matrix.shape[1]:
        raise ParseError(
            f"{path}: sidecar id counts ({len(row_ids)} x {len(col_ids)}) "
            f"do not match the matrix shape {matrix.shape}"
        )
    if len(set(row_ids)) != len(row_ids) or len(set(col_ids)) != len(col_ids):
        raise ParseError(f"{path}: duplicate ids in sidecar files")
    return matrix, row_ids, col_ids


def write_expression_matrix(path, values, row_ids, col_ids):
    """Write a matrix in the format implied by the file suffix."""
    path = Path(path)
    values = np.asarray(values, dtype=float)
    if values.shape != (len(row_ids), len(col_ids)):
        raise ParseError(
            f"{path}: matrix shape {values.shape} does not match "
            f"{len(row_ids)} row ids and {len(col_ids)} column ids"
        )
    if path.suffix == ".mtx":
        scipy.io.mmwrite(path, scipy.sparse.coo_matrix(values), precision=17)
        rows_path, cols_path = _sidecar_paths(path)
        rows_path.write_text("".join(f"{r}\n" for r in row_ids))
        cols_path.write_text("".join(f"{c}\n" for c in col_ids))
        return
    with path.open("w", newline="") as handle:
        writer = csv.writer(handle)
        writer.writerow(["id", *col_ids])
        for rid, row in zip(row_ids, values):
            writer.writerow([rid, *[_format(v) for v in row]])


def read_coordinates(path, spot_ids):
    """Read ``id,x,y[,z]`` coordinates and align them to the given spot order.

    Rows for unknown spots are ignored with a warning; a missing spot is an
    error. All rows must share one dimensionality.
    """
    path = Path(path)
    if not path.exists():
        raise ParseError(f"{path}: file not found")
    table: dict[str, list[float]] = {}
    dim = None
    with path.open(newline="") as handle:
        reader = csv.reader(handle)
        try:
            header = next(reader)
        except StopIteration:
            raise ParseError(f"{path}: empty file") from None
        if len(header) not in (3, 4):
            raise ParseError(f"{path}: line 1: expected header id,x,y[,z]")
        for lineno, record in enumerate(reader, start=2):
            if not record:
                continue
            if len(record) != len(header):
                raise ParseError(
                    f"{path}: line {lineno}: mixed dimensionality "
                    f"(expected {len(header)} fields, got {len(record)})"
                )
            try:
                values = [float(x) for x in record[1:]]
            except ValueError as exc:
                raise ParseError(f"{path}: line {lineno}: {exc}") from None
            key = record[0].strip()
            if key in table:
                raise ParseError(f"{path}: line {lineno}: duplicate spot id {key!r}")
            table[key] = values
            dim = len(values)
    missing = [s for s in spot_ids if s not in table]
    if missing:
        raise ParseError(f"{path}: missing coordinates for spots: {', '.join(missing[:5])}")
    extra = set(table) - set(spot_ids)
    if extra:
        warnings.warn(
            f"{path}: ignoring {len(extra)} coordinate rows without a matching spot",
            DotWarning,
        )
    coords = np.array([table[s] for s in spot_ids], dtype=float)
    if coords.shape[1] != dim:
        raise ParseError(f"{path}: inconsistent coordinate dimensionality")
    return coords


def write_coordinates(path, coordinates, spot_ids):
    coordinates = np.asarray(coordinates, dtype=float)
    header = ["id", "x", "y"] + (["z"] if coordinates.shape[1] == 3 else [])
    with Path(path).open("w", newline="") as handle:
        writer = csv.writer(handle)
        writer.writerow(header)
        for sid, row in zip(spot_ids, coordinates):
            writer.writerow([sid, *[_format(v) for v in row]])


def read_labels(path):
    """Read an ``id,label`` table into an ordered mapping."""
    path = Path(path)
    if not path.exists():
        raise ParseError(f"{path}: file not found")
    table: dict[str, str] = {}
    with path.open(newline="") as handle:
        reader = csv.reader(handle)
        try:
            next(reader)
        except StopIteration:
            raise ParseError(f"{path}: empty file") from None
        for lineno, record in enumerate(reader, start=2):
            if not record:
                continue
            if len(record) != 2:
                raise ParseError(f"{path}: line {lineno}: expected id,label")
            key = record[0].strip()
            if key in table:
                raise ParseError(f"{path}: line {lineno}: duplicate id {key!r}")
            table[key] = record[1].strip()
    return table


def write_labels(path, ids, labels):
    with Path(path).open("w", newline="") as handle:
        writer = csv.writer(handle)
        writer.writerow(["id", "label"])
        for key, lab in zip(ids, labels):
            writer.writerow([key, lab])


def read_prior(path):
    """Read a ``population,abundance`` table; returns ``(labels, values)``."""
    path = Path(path)
    if not path.exists():
        raise ParseError(f"{path}: file not found")
    labels = []
    values = []
    with path.open(newline="") as handle:
        reader = csv.reader(handle)
        try:
            next(reader)
        except StopIteration:
            raise ParseError(f"{path}: empty file") from None
        for lineno, record in enumerate(reader, start=2):
            if not record:
                continue
            if len(record) != 2:
                raise ParseError(f"{path}: line {lineno}: expected population,abundance")
            labels.append(record[0].strip())
            try:
                value = float(record[1])
            except ValueError as exc:
                raise ParseError(f"{path}: line {lineno}: {exc}") from None
            if value < 0:
                raise ParseError(f"{path}: line {lineno}: negative abundance")
            values.append(value)
    if len(set(labels)) != len(labels):
        raise ParseError(f"{path}: duplicate population labels")
    return labels, np.array(values, dtype=float)


def write_pairs(path, pair_set, spot_ids):
    with Path(path).open("w", newline="") as handle:
        writer = csv.writer(handle)
        writer.writerow(["spot_i", "spot_j", "weight"])
        for a, b, w in zip(pair_set.i, pair_set.j, pair_set.weights):
            writer.writerow([spot_ids[a], spot_ids[b], _format(w)])
