"""Reader for the scan-table CSV/JSON files written by the rydcz CLI.

The schema is the public interface: CSV files carry the x-axis label and
the y-axis values in the header row, one x value plus one matrix row per
line; JSON sidecars carry the same data with labels, method tag, and run
metadata.  This module deliberately has no dependency on the simulator.
"""

from __future__ import annotations

import csv
import json
from dataclasses import dataclass, field
from pathlib import Path

import numpy as np


class TableFormatError(ValueError):
    """Input file does not match the scan-table schema."""


@dataclass
class ScanTable:
    x_label: str
    x_values: np.ndarray
    y_label: str
    y_values: np.ndarray
    values: np.ndarray
    method: str = ""
    metadata: dict = field(default_factory=dict)

    @property
    def shape(self):
        return self.values.shape


def _parse_float(cell: str, path, row: int, col: int) -> float:
    try:
        return float(cell)
    except ValueError as exc:
        raise TableFormatError(
            f"{path}: row {row}, column {col}: {cell!r} is not a number") from exc


def load_table(path) -> ScanTable:
    """Load a scan table from .json or .csv (JSON preferred when given)."""
    path = Path(path)
    if not path.exists():
        raise TableFormatError(f"{path}: no such file")
    if path.suffix == ".json":
        return _from_json(path)
    return _from_csv(path)


def _from_json(path: Path) -> ScanTable:
    with open(path) as fh:
        try:
            doc = json.load(fh)
        except json.JSONDecodeError as exc:
            raise TableFormatError(f"{path}: invalid JSON ({exc})") from exc
    for key in ("x_label", "x_values", "y_values", "values"):
        if key not in doc:
            raise TableFormatError(f"{path}: missing field {key!r}")
    table = ScanTable(
        x_label=doc["x_label"],
        x_values=np.asarray(doc["x_values"], dtype=float),
        y_label=doc.get("y_label", ""),
        y_values=np.asarray(doc["y_values"], dtype=float),
        values=np.asarray(doc["values"], dtype=float),
        method=doc.get("method", ""),
        metadata=doc.get("metadata", {}),
    )
    _validate(table, path)
    return table


def _from_csv(path: Path) -> ScanTable:
    with open(path, newline="") as fh:
        rows = list(csv.reader(fh))
    if len(rows) < 2:
        raise TableFormatError(f"{path}: expected a header row and at least one data row")
    header = rows[0]
    if len(header) < 2:
        raise TableFormatError(f"{path}: header must name the x axis and one y value")
    y_values = [_parse_float(c, path, 0, j + 1) for j, c in enumerate(header[1:])]
    x_values, values = [], []
    for i, row in enumerate(rows[1:], start=1):
        if len(row) != len(header):
            raise TableFormatError(
                f"{path}: row {i} has {len(row)} columns, header has {len(header)}")
        x_values.append(_parse_float(row[0], path, i, 0))
        values.append([_parse_float(c, path, i, j + 1) for j, c in enumerate(row[1:])])
    sidecar = path.with_suffix(".json")
    method, metadata, y_label = "", {}, ""
    if sidecar.exists():
        try:
            meta_doc = _from_json(sidecar)
            method, metadata, y_label = meta_doc.method, meta_doc.metadata, meta_doc.y_label
        except TableFormatError:
            pass
    table = ScanTable(x_label=header[0], x_values=np.asarray(x_values),
                      y_label=y_label, y_values=np.asarray(y_values),
                      values=np.asarray(values), method=method, metadata=metadata)
    _validate(table, path)
    return table


def _validate(table: ScanTable, path):
    if table.values.ndim != 2:
        raise TableFormatError(f"{path}: values must form a 2D matrix")
    if table.values.shape != (table.x_values.size, table.y_values.size):
        raise TableFormatError(
            f"{path}: matrix shape {table.values.shape} does not match axes "
            f"({table.x_values.size}, {table.y_values.size})")
    if table.values.size == 0:
        raise TableFormatError(f"{path}: empty table")
