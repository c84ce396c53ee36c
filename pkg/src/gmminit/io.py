"""Dataset CSV and mixture JSON formats.

Dataset CSV: comma separated, one point per row, numeric columns only. An
optional header row is detected by a non-numeric first row. Columns listed
in ``label_columns`` (by index or header name) are dropped from the points
and returned separately.

Mixture JSON::

    {"k": K, "d": D,
     "components": [{"weight": w, "mean": [...], "covariance": [[...], ...]}, ...]}

Covariances are stored row-major as nested lists; floats use Python's
shortest round-trip representation, so a write/read cycle is exact.
"""

from __future__ import annotations

import csv
import json
from pathlib import Path
from typing import Sequence

import numpy as np

from .core import GmmParams, as_data_matrix


class CsvFormatError(ValueError):
    def __init__(self, path, line: int, message: str):
        super().__init__(f"{path}:{line}: {message}")
        self.path = path
        self.line = line


def _is_number(text: str) -> bool:
    try:
        float(text)
    except ValueError:
        return False
    return True


def read_dataset_csv(path, label_columns: Sequence[int | str] = ()) -> tuple[np.ndarray, np.ndarray | None, list[str] | None]:
    """Read points from ``path``; returns ``(data, labels, header)``.

    ``labels`` holds the first flagged label column (or ``None``). Malformed
    rows raise :class:`CsvFormatError` carrying the 1-based line number.
    """
    path = Path(path)
    with path.open(newline="") as fh:
        rows = [(i + 1, row) for i, row in enumerate(csv.reader(fh)) if row and any(c.strip() for c in row)]
    if not rows:
        raise CsvFormatError(path, 1, "file contains no data rows")
    header = None
    if not all(_is_number(c) for c in rows[0][1]):
        header = [c.strip() for c in rows[0][1]]
        rows = rows[1:]
        if not rows:
            raise CsvFormatError(path, 2, "file has a header but no data rows")
    width = len(rows[0][1])
    drop = set()
    for col in label_columns:
        if isinstance(col, str) and not col.lstrip("-").isdigit():
            if header is None or col not in header:
                raise ValueError(f"label column {col!r} not found in header of {path}")
            drop.add(header.index(col))
        else:
            idx = int(col)
            drop.add(idx % width)
    keep = [j for j in range(width) if j not in drop]
    if not keep:
        raise ValueError("no numeric columns left after removing label columns")
    values = np.empty((len(rows), width))
    label_idx = min(drop) if drop else None
    labels = []
    for r, (line, row) in enumerate(rows):
        if len(row) != width:
            raise CsvFormatError(path, line, f"expected {width} columns, found {len(row)}")
        for j, cell in enumerate(row):
            if j in drop:
                continue
            try:
                values[r, j] = float(cell)
            except ValueError:
                raise CsvFormatError(path, line, f"non-numeric value {cell.strip()!r} in column {j}") from None
        if label_idx is not None:
            labels.append(row[label_idx].strip())
    try:
        data = as_data_matrix(values[:, keep])
    except ValueError as exc:
        raise CsvFormatError(path, rows[0][0], str(exc)) from None
    label_arr = None
    if label_idx is not None:
        label_arr = np.array([int(v) if v.lstrip("-").isdigit() else v for v in labels], dtype=object)
        if all(isinstance(v, int) for v in label_arr):
            label_arr = label_arr.astype(np.int64)
    return data, label_arr, header


def write_dataset_csv(path, data: np.ndarray, labels: np.ndarray | None = None,
                      header: bool = False) -> None:
    path = Path(path)
    data = np.atleast_2d(data)
    with path.open("w", newline="") as fh:
        writer = csv.writer(fh, lineterminator="\n")
        if header:
            cols = [f"x{j}" for j in range(data.shape[1])]
            writer.writerow(cols + (["label"] if labels is not None else []))
        for i, row in enumerate(data):
            cells = [repr(float(v)) for v in row]
            if labels is not None:
                cells.append(str(int(labels[i])))
            writer.writerow(cells)


def gmm_to_dict(theta: GmmParams) -> dict:
    return {
        "k": theta.k,
        "d": theta.dim,
        "components": [
            {
                "weight": c.weight,
                "mean": [float(v) for v in c.mean],
                "covariance": [[float(v) for v in row] for row in c.covariance],
            }
            for c in theta
        ],
    }


def gmm_from_dict(obj: dict) -> GmmParams:
    comps = obj["components"]
    return GmmParams.from_arrays(
        [c["weight"] for c in comps],
        [c["mean"] for c in comps],
        [c["covariance"] for c in comps],
    )


def write_gmm_json(path, theta: GmmParams, extra: dict | None = None) -> None:
    obj = gmm_to_dict(theta)
    if extra:
        obj.update(extra)
    Path(path).write_text(json.dumps(obj, indent=2) + "\n")


def read_gmm_json(path) -> GmmParams:
    return gmm_from_dict(json.loads(Path(path).read_text()))
