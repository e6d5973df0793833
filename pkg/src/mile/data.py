"""CSV ingestion and z-score standardization."""

import csv
import warnings
from dataclasses import dataclass

import numpy as np

from .errors import DataError, ShapeError
from .network import TASKS, Dataset


def _parse_float(cell, row, column):
    try:
        value = float(cell)
    except ValueError:
        raise DataError(f"non-numeric value {cell!r} at row {row}, column {column!r}", row, column) from None
    if not np.isfinite(value):
        raise DataError(f"non-finite value {cell!r} at row {row}, column {column!r}", row, column)
    return value


def load_csv(path, target, task="regression", labels=None):
    """Read a headed CSV into a :class:`Dataset`.

    Every column other than ``target`` (a name or list of names) is a numeric
    feature. Rows are numbered from 1, starting at the first line after the
    header. Classification targets are mapped to integers in order of first
    appearance; pass ``labels`` to reuse an existing dictionary (unseen labels
    are then an error).

    Raises
    ------
    DataError
        For an empty file, missing column, ragged or non-numeric row.
    """
    if task not in TASKS:
        raise DataError(f"unknown task {task!r}")
    targets = [target] if isinstance(target, str) else list(target)
    if task == "classification" and len(targets) != 1:
        raise DataError("classification takes exactly one target column")
    with open(path, newline="", encoding="utf-8") as fh:
        reader = csv.reader(fh)
        header = next(reader, None)
        if not header:
            raise DataError(f"{path}: empty file (no header)", row=0)
        header = [h.strip() for h in header]
        for name in targets:
            if name not in header:
                raise DataError(f"{path}: missing target column {name!r}", row=0, column=name)
        t_idx = [header.index(name) for name in targets]
        f_idx = [j for j in range(len(header)) if j not in t_idx]
        feats, ys = [], []
        label_map = {lab: i for i, lab in enumerate(labels)} if labels is not None else {}
        for row, cells in enumerate(reader, start=1):
            if not cells:
                continue
            if len(cells) != len(header):
                raise DataError(f"row {row} has {len(cells)} fields, expected {len(header)}", row)
            feats.append([_parse_float(cells[j], row, header[j]) for j in f_idx])
            if task == "regression":
                ys.append([_parse_float(cells[j], row, header[j]) for j in t_idx])
            else:
                lab = cells[t_idx[0]].strip()
                if lab not in label_map:
                    if labels is not None:
                        raise DataError(f"unknown label {lab!r} at row {row}", row, targets[0])
                    label_map[lab] = len(label_map)
                ys.append(label_map[lab])
    if not feats:
        raise DataError(f"{path}: no data rows", row=1)
    if not f_idx:
        raise DataError(f"{path}: no feature columns")
    X = np.array(feats, dtype=np.float64)
    if task == "regression":
        return Dataset(X, np.array(ys, dtype=np.float64), "regression")
    return Dataset(X, np.array(ys, dtype=np.int64), "classification", list(label_map))


def _scale(values, what):
    with np.errstate(over="ignore", invalid="ignore"):
        mean = values.mean(axis=0)
        scale = values.std(axis=0)
    if not (np.all(np.isfinite(mean)) and np.all(np.isfinite(scale))):
        raise DataError(f"{what} values too large to standardize (overflow)")
    const = ~(scale > 0)
    if const.any():
        warnings.warn(f"constant {what} column(s) {np.flatnonzero(const).tolist()}; using scale 1", stacklevel=3)
        scale = np.where(const, 1.0, scale)
    return mean, scale


@dataclass(frozen=True)
class StandardizationStats:
    """Per-feature and (regression only) per-target mean and scale."""

    x_mean: np.ndarray
    x_scale: np.ndarray
    y_mean: np.ndarray = None
    y_scale: np.ndarray = None

    def __post_init__(self):
        for name in ("x_mean", "x_scale", "y_mean", "y_scale"):
            value = getattr(self, name)
            if value is not None:
                arr = np.array(value, dtype=np.float64).ravel()
                arr.setflags(write=False)
                object.__setattr__(self, name, arr)
        if np.any(self.x_scale <= 0) or (self.y_scale is not None and np.any(self.y_scale <= 0)):
            raise ShapeError("standardization scales must be positive")

    def to_dict(self):
        out = {"x_mean": self.x_mean.tolist(), "x_scale": self.x_scale.tolist()}
        if self.y_mean is not None:
            out.update(y_mean=self.y_mean.tolist(), y_scale=self.y_scale.tolist())
        return out

    @classmethod
    def from_dict(cls, d):
        return cls(d["x_mean"], d["x_scale"], d.get("y_mean"), d.get("y_scale"))

    def transform_X(self, X):
        X = np.asarray(X, dtype=np.float64)
        if X.ndim != 2 or X.shape[1] != self.x_mean.size:
            raise ShapeError(f"expected {self.x_mean.size} feature columns, got shape {X.shape}")
        return (X - self.x_mean) / self.x_scale

    def transform_y(self, y):
        return (y - self.y_mean) / self.y_scale

    def inverse_y(self, y):
        return y * self.y_scale + self.y_mean


def fit_standardizer(train):
    """z-score statistics from the training set."""
    x_mean, x_scale = _scale(train.X, "feature")
    if train.task == "regression":
        y_mean, y_scale = _scale(train.y, "target")
        return StandardizationStats(x_mean, x_scale, y_mean, y_scale)
    return StandardizationStats(x_mean, x_scale)


def apply_standardizer(stats, data):
    X = stats.transform_X(data.X)
    if data.task == "regression":
        if stats.y_mean is None:
            raise ShapeError("standardizer has no target statistics")
        return Dataset(X, stats.transform_y(data.y), "regression")
    return Dataset(X, data.y, data.task, data.labels)


def load_features(path, columns=None):
    """Read a feature matrix; ``columns`` selects named columns (others are ignored)."""
    with open(path, newline="", encoding="utf-8") as fh:
        reader = csv.reader(fh)
        header = next(reader, None)
        if not header:
            raise DataError(f"{path}: empty file (no header)", row=0)
        header = [h.strip() for h in header]
        if columns is None:
            idx = list(range(len(header)))
        else:
            for name in columns:
                if name not in header:
                    raise DataError(f"{path}: missing feature column {name!r}", row=0, column=name)
            idx = [header.index(name) for name in columns]
        rows = []
        for row, cells in enumerate(reader, start=1):
            if not cells:
                continue
            if len(cells) != len(header):
                raise DataError(f"row {row} has {len(cells)} fields, expected {len(header)}", row)
            rows.append([_parse_float(cells[j], row, header[j]) for j in idx])
    if not rows:
        raise DataError(f"{path}: no data rows", row=1)
    return np.array(rows, dtype=np.float64)


def feature_names(path, target):
    """Header names of the feature columns in a training CSV."""
    targets = {target} if isinstance(target, str) else set(target)
    with open(path, newline="", encoding="utf-8") as fh:
        header = next(csv.reader(fh), [])
    return [h.strip() for h in header if h.strip() not in targets]
