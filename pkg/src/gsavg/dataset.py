"""Labeled numeric data: container, CSV I/O and stratified splitting."""
from __future__ import annotations

import csv
import hashlib
import math
import os
from dataclasses import dataclass, field
from pathlib import Path

import numpy as np

__all__ = [
    "Dataset",
    "DataError",
    "load_csv",
    "write_csv",
    "split_train_test",
    "stratified_indices",
    "standardize",
    "load_features_csv",
    "column_scaling",
]


class DataError(ValueError):
    """Raised for malformed or unusable input data."""


@dataclass(frozen=True, eq=False)
class Dataset:
    """Two-class data set with rows as observations.

    ``labels`` take values in {1, 2}. ``label_map`` records the original tag
    of each class when the data came from a file.
    """

    features: np.ndarray
    labels: np.ndarray
    feature_names: tuple[str, ...] = ()
    label_map: dict[str, int] = field(default_factory=dict)

    def __post_init__(self):
        x = np.array(self.features, dtype=np.float64, copy=True)
        if x.ndim != 2:
            raise DataError(f"features must be a 2-d matrix, got shape {x.shape}")
        y = np.array(self.labels, copy=True).astype(np.int64).ravel()
        if y.shape[0] != x.shape[0]:
            raise DataError(f"{y.shape[0]} labels for {x.shape[0]} feature rows")
        if not np.all(np.isfinite(x)):
            r, c = np.argwhere(~np.isfinite(x))[0]
            raise DataError(f"non-finite value at row {r}, column {c}")
        if not np.isin(y, (1, 2)).all():
            raise DataError(f"labels must be in {{1, 2}}, got {sorted(set(y.tolist()))}")
        names = tuple(self.feature_names) or tuple(f"f{i + 1}" for i in range(x.shape[1]))
        if len(names) != x.shape[1]:
            raise DataError(f"{len(names)} feature names for {x.shape[1]} columns")
        x.setflags(write=False)
        y.setflags(write=False)
        object.__setattr__(self, "features", x)
        object.__setattr__(self, "labels", y)
        object.__setattr__(self, "feature_names", names)
        object.__setattr__(self, "label_map", dict(self.label_map))

    @property
    def n(self) -> int:
        return self.features.shape[0]

    @property
    def dim(self) -> int:
        return self.features.shape[1]

    def class_rows(self, label: int) -> np.ndarray:
        return self.features[self.labels == label]

    def class_counts(self) -> tuple[int, int]:
        return int(np.sum(self.labels == 1)), int(np.sum(self.labels == 2))

    def subset(self, rows) -> "Dataset":
        rows = np.asarray(rows, dtype=np.intp)
        return Dataset(self.features[rows], self.labels[rows], self.feature_names, self.label_map)

    def require_both_classes(self, min_per_class: int = 1) -> None:
        n1, n2 = self.class_counts()
        if min(n1, n2) < min_per_class:
            raise DataError(
                f"need at least {min_per_class} observations per class, got n1={n1}, n2={n2}"
            )

    def fingerprint(self) -> str:
        h = hashlib.sha256()
        h.update(np.ascontiguousarray(self.features).tobytes())
        h.update(np.ascontiguousarray(self.labels).tobytes())
        h.update(repr(self.features.shape).encode())
        return h.hexdigest()

    def __eq__(self, other):
        if not isinstance(other, Dataset):
            return NotImplemented
        return (
            self.features.shape == other.features.shape
            and np.array_equal(self.features, other.features)
            and np.array_equal(self.labels, other.labels)
            and self.feature_names == other.feature_names
        )

    __hash__ = None


def _resolve_label_column(header: list[str], label_column) -> int:
    if label_column is None:
        return len(header) - 1
    if isinstance(label_column, int):
        idx = label_column if label_column >= 0 else len(header) + label_column
        if not 0 <= idx < len(header):
            raise DataError(f"label column index {label_column} out of range for {len(header)} columns")
        return idx
    if label_column in header:
        return header.index(label_column)
    if label_column.lstrip("-").isdigit():
        return _resolve_label_column(header, int(label_column))
    raise DataError(f"label column {label_column!r} not in header {header}")


def load_csv(path, label_column=None) -> Dataset:
    """Read a headed, comma-delimited CSV file.

    ``label_column`` is a header name or a column index; the last column is
    used when omitted. Class tags are mapped to 1 and 2 in order of first
    appearance and the mapping is kept in ``Dataset.label_map``.
    """
    path = Path(path)
    if not path.is_file():
        raise DataError(f"no such file: {path}")
    with path.open(newline="", encoding="utf-8") as fh:
        rows = list(csv.reader(fh))
    if not rows:
        raise DataError(f"{path} is empty")
    header, body = rows[0], [r for r in rows[1:] if r]
    lab = _resolve_label_column(header, label_column)
    names = [h for i, h in enumerate(header) if i != lab]

    label_map: dict[str, int] = {}
    labels = []
    x = np.empty((len(body), len(header) - 1))
    for r, row in enumerate(body):
        # line numbers are 1-based and count the header
        line = r + 2
        if len(row) != len(header):
            raise DataError(f"{path}: line {line} has {len(row)} fields, expected {len(header)}")
        tag = row[lab].strip()
        if tag == "":
            raise DataError(f"{path}: empty label at line {line}, column {header[lab]!r}")
        if tag not in label_map:
            if len(label_map) == 2:
                raise DataError(
                    f"{path}: more than two distinct labels ({', '.join([*label_map, tag])}); "
                    "multi-class unsupported"
                )
            label_map[tag] = len(label_map) + 1
        labels.append(label_map[tag])
        j = 0
        for c, cell in enumerate(row):
            if c == lab:
                continue
            if cell.strip() == "":
                raise DataError(f"{path}: missing value at line {line}, column {header[c]!r}")
            try:
                v = float(cell)
            except ValueError:
                raise DataError(
                    f"{path}: non-numeric value {cell!r} at line {line}, column {header[c]!r}"
                ) from None
            if not math.isfinite(v):
                raise DataError(f"{path}: non-finite value {cell!r} at line {line}, column {header[c]!r}")
            x[r, j] = v
            j += 1
    if len(label_map) < 2:
        raise DataError(f"{path}: need two distinct labels, found {list(label_map)}")
    return Dataset(x, np.array(labels), tuple(names), label_map)


def write_csv(data: Dataset, path, label_column: str = "label") -> None:
    """Write ``data`` with the label as the last column.

    Floats are written with ``repr`` so a reload is bit-exact. Original class
    tags are restored when ``label_map`` is present.
    """
    inverse = {v: k for k, v in data.label_map.items()}
    path = Path(path)
    tmp = path.with_name(path.name + ".tmp")
    with tmp.open("w", newline="", encoding="utf-8") as fh:
        w = csv.writer(fh)
        w.writerow([*data.feature_names, label_column])
        for row, y in zip(data.features, data.labels):
            w.writerow([repr(float(v)) for v in row] + [inverse.get(int(y), str(int(y)))])
    os.replace(tmp, path)


def stratified_indices(labels, train_fraction: float, seed: int) -> tuple[np.ndarray, np.ndarray]:
    """Row indices for a per-class random split; ``ceil(fraction * n_j)`` go to train."""
    if not 0.0 < train_fraction < 1.0:
        raise DataError(f"train_fraction must lie in (0, 1), got {train_fraction}")
    labels = np.asarray(labels)
    rng = np.random.default_rng(seed)
    train, test = [], []
    for c in (1, 2):
        rows = np.flatnonzero(labels == c)
        if rows.size < 2:
            raise DataError(f"class {c} has {rows.size} rows; need at least 2 to split")
        # rounding guards against 0.1 * 30 = 3.0000000000000004
        k = math.ceil(round(train_fraction * rows.size, 9))
        perm = rng.permutation(rows)
        train.append(perm[:k])
        test.append(perm[k:])
    return np.sort(np.concatenate(train)), np.sort(np.concatenate(test))


def split_train_test(data: Dataset, train_fraction: float, seed: int) -> tuple[Dataset, Dataset]:
    tr, te = stratified_indices(data.labels, train_fraction, seed)
    return data.subset(tr), data.subset(te)


def column_scaling(x: np.ndarray) -> tuple[np.ndarray, np.ndarray]:
    """Column means and SDs; constant columns get SD 1 so they are only centered."""
    x = np.asarray(x, dtype=np.float64)
    mu = x.mean(axis=0)
    sd = x.std(axis=0, ddof=1) if x.shape[0] > 1 else np.ones(x.shape[1])
    return mu, np.where(sd > 0, sd, 1.0)


def standardize(train: Dataset, *others: Dataset) -> list[Dataset]:
    """Center and scale every data set with the training means and SDs."""
    mu, sd = column_scaling(train.features)
    return [
        Dataset((d.features - mu) / sd, d.labels, d.feature_names, d.label_map)
        for d in (train, *others)
    ]


def load_features_csv(path, drop_column=None) -> tuple[np.ndarray, list[str]]:
    """Feature matrix of an unlabeled (or label-ignored) headed CSV file."""
    path = Path(path)
    if not path.is_file():
        raise DataError(f"no such file: {path}")
    with path.open(newline="", encoding="utf-8") as fh:
        rows = [r for r in csv.reader(fh) if r]
    if not rows:
        raise DataError(f"{path} is empty")
    header = rows[0]
    skip = None if drop_column is None else _resolve_label_column(header, drop_column)
    keep = [c for c in range(len(header)) if c != skip]
    x = np.empty((len(rows) - 1, len(keep)))
    for r, row in enumerate(rows[1:]):
        if len(row) != len(header):
            raise DataError(f"{path}: line {r + 2} has {len(row)} fields, expected {len(header)}")
        for j, c in enumerate(keep):
            try:
                x[r, j] = float(row[c])
            except ValueError:
                raise DataError(f"{path}: non-numeric value {row[c]!r} at line {r + 2}, "
                                f"column {header[c]!r}") from None
    if not np.isfinite(x).all():
        raise DataError(f"{path}: non-finite values")
    return x, [header[c] for c in keep]
