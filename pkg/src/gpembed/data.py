"""CSV ingestion and normalization of real datasets."""

import csv
from dataclasses import dataclass
from pathlib import Path

import numpy as np

from .exceptions import DataError
from .gp import Dataset


def load_csv(path, target_column):
    """Read a numeric CSV with a header row.

    Returns ``(dataset, feature_names)``; features are all non-target
    columns in header order.
    """
    path = Path(path)
    try:
        handle = path.open(newline="")
    except OSError as exc:
        raise DataError(f"cannot read {path}: {exc}") from exc
    with handle:
        rows = list(csv.reader(handle))
    rows = [r for r in rows if r and any(cell.strip() for cell in r)]
    if not rows:
        raise DataError(f"{path} is empty")
    header = [h.strip() for h in rows[0]]
    if target_column not in header:
        raise DataError(f"target column {target_column!r} not in header {header}")
    t = header.index(target_column)
    features = [h for i, h in enumerate(header) if i != t]

    values = np.empty((len(rows) - 1, len(header)))
    for r, row in enumerate(rows[1:], start=2):
        if len(row) != len(header):
            raise DataError(f"row {r} has {len(row)} cells, header has {len(header)}")
        for c, cell in enumerate(row):
            try:
                values[r - 2, c] = float(cell)
            except ValueError:
                raise DataError(f"non-numeric cell {cell!r} at row {r}, "
                                f"column {header[c]!r}") from None
    if not np.all(np.isfinite(values)):
        raise DataError(f"{path} contains non-finite values")
    X = np.delete(values, t, axis=1)
    return Dataset(X, values[:, t]), features


@dataclass(frozen=True)
class NormalizationRecord:
    """Constants of the affine maps applied by :func:`normalize`."""

    kept: np.ndarray
    x_min: np.ndarray
    x_max: np.ndarray
    y_mean: float
    y_std: float

    def transform_X(self, X):
        X = np.atleast_2d(X)[:, self.kept]
        return 2.0 * (X - self.x_min) / (self.x_max - self.x_min) - 1.0

    def inverse_X(self, Xn):
        return (np.atleast_2d(Xn) + 1.0) / 2.0 * (self.x_max - self.x_min) + self.x_min

    def transform_Y(self, Y):
        return (np.asarray(Y) - self.y_mean) / self.y_std

    def inverse_Y(self, Yn):
        return np.asarray(Yn) * self.y_std + self.y_mean


def normalize(raw):
    """Map features affinely onto [-1, 1] and standardize the outputs.

    Constant features are dropped.
    """
    if raw.N < 2:
        raise DataError("normalization needs at least two points")
    x_min, x_max = raw.X.min(axis=0), raw.X.max(axis=0)
    kept = np.flatnonzero(x_max > x_min)
    if kept.size == 0:
        raise DataError("every feature is constant")
    y_mean, y_std = float(raw.Y.mean()), float(raw.Y.std())
    if y_std == 0.0:
        raise DataError("target column is constant")
    rec = NormalizationRecord(kept, x_min[kept], x_max[kept], y_mean, y_std)
    return Dataset(rec.transform_X(raw.X), rec.transform_Y(raw.Y), raw.noise_variance), rec
