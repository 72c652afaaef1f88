"""Loading, validating, normalizing and splitting tabular process data."""

from __future__ import annotations

import csv
import math
import warnings
from dataclasses import dataclass, field
from pathlib import Path
from typing import Iterable, Mapping, Sequence

import numpy as np

from .errors import (
    DegenerateWarning,
    EmptyDataError,
    InsufficientDataError,
    MissingFeatureError,
    ParseError,
    SchemaError,
)

FEATURES = ("A", "B", "C", "D", "E", "F", "G", "H")
LONG_NAMES = {
    "A": "Raw-material",
    "B": "Sulfur",
    "C": "Dew-point",
    "D": "Air-sulfur-oven",
    "E": "Air-converter",
    "F": "Air-SO3-filter",
    "G": "Molar",
    "H": "Molar-stp",
}
TARGET = "NT"
OUTLIER = "OUTLIER"


def feature_key(name: str):
    """Sort key placing A..H in canonical order ahead of any other names."""
    if name in FEATURES:
        return (0, FEATURES.index(name), "")
    return (1, 0, name)


def canonical(features: Iterable[str]) -> list[str]:
    return sorted(features, key=feature_key)


@dataclass(frozen=True)
class Dataset:
    columns: dict[str, np.ndarray]
    target: np.ndarray
    outlier_flag: np.ndarray = None

    def __post_init__(self):
        cols = {k: np.asarray(v, dtype=float) for k, v in self.columns.items()}
        target = np.asarray(self.target, dtype=float)
        n = target.shape[0]
        flags = self.outlier_flag
        flags = np.zeros(n, dtype=bool) if flags is None else np.asarray(flags, dtype=bool)
        for name, col in cols.items():
            if col.shape != (n,):
                raise ValueError(f"column {name!r} has shape {col.shape}, expected ({n},)")
        if flags.shape != (n,):
            raise ValueError("outlier_flag length does not match target")
        object.__setattr__(self, "columns", {k: cols[k] for k in canonical(cols)})
        object.__setattr__(self, "target", target)
        object.__setattr__(self, "outlier_flag", flags)

    @property
    def n_rows(self) -> int:
        return self.target.shape[0]

    @property
    def features(self) -> list[str]:
        return list(self.columns)

    def take(self, rows) -> "Dataset":
        rows = np.asarray(rows, dtype=np.int64)
        return Dataset(
            {k: v[rows] for k, v in self.columns.items()},
            self.target[rows],
            self.outlier_flag[rows],
        )

    def select(self, features: Sequence[str]) -> dict[str, np.ndarray]:
        out = {}
        for f in features:
            if f not in self.columns:
                raise MissingFeatureError(f)
            out[f] = self.columns[f]
        return out

    def __len__(self):
        return self.n_rows


def as_matrix(X, features: Sequence[str], rows=None) -> np.ndarray:
    """Stack the named columns of ``X`` (a mapping or Dataset) into an (n, k) array.

    Features absent from ``X`` raise MissingFeatureError.
    """
    columns = X.columns if isinstance(X, Dataset) else X
    if not isinstance(columns, Mapping):
        raise TypeError("X must be a Dataset or a mapping of feature name -> column")
    cols = []
    for f in features:
        if f not in columns:
            raise MissingFeatureError(f)
        col = np.asarray(columns[f], dtype=float)
        cols.append(col if rows is None else col[rows])
    if not cols:
        if rows is not None:
            n = len(rows)
        else:
            n = len(next(iter(columns.values()))) if columns else 0
        return np.empty((n, 0))
    return np.ascontiguousarray(np.column_stack(cols))


def load_csv(path) -> Dataset:
    """Read a process-data CSV with header ``A,...,H,NT[,OUTLIER]``.

    Columns may appear in any order; extra columns are ignored.
    """
    path = Path(path)
    with path.open(newline="", encoding="utf-8-sig") as fh:
        reader = csv.reader(fh)
        header = next(reader, None)
        if header is None or not any(h.strip() for h in header):
            raise EmptyDataError(f"{path}: file is empty")
        header = [h.strip() for h in header]
        for col in (*FEATURES, TARGET):
            if col not in header:
                raise SchemaError(col, f"{path}: missing required column {col!r}")
        pos = {name: header.index(name) for name in (*FEATURES, TARGET)}
        flag_pos = header.index(OUTLIER) if OUTLIER in header else None
        values = {name: [] for name in pos}
        flags = []
        for lineno, row in enumerate(reader, start=2):
            if not row or all(not c.strip() for c in row):
                continue
            for name, j in pos.items():
                cell = row[j] if j < len(row) else ""
                try:
                    v = float(cell)
                except ValueError:
                    raise ParseError(lineno, name, cell) from None
                if not math.isfinite(v):
                    raise ParseError(lineno, name, cell)
                values[name].append(v)
            if flag_pos is not None:
                cell = row[flag_pos].strip() if flag_pos < len(row) else ""
                if cell not in ("0", "1"):
                    raise ParseError(lineno, OUTLIER, cell)
                flags.append(cell == "1")
    if not values[TARGET]:
        raise EmptyDataError(f"{path}: no data rows")
    return Dataset(
        {f: np.array(values[f]) for f in FEATURES},
        np.array(values[TARGET]),
        np.array(flags, dtype=bool) if flag_pos is not None else None,
    )


def write_csv(data: Dataset, path, include_outliers: bool = True) -> None:
    path = Path(path)
    names = list(data.columns)
    header = names + [TARGET] + ([OUTLIER] if include_outliers else [])
    with path.open("w", newline="", encoding="utf-8") as fh:
        w = csv.writer(fh, lineterminator="\n")
        w.writerow(header)
        cols = [data.columns[n] for n in names]
        for i in range(data.n_rows):
            row = [repr(float(c[i])) for c in cols] + [repr(float(data.target[i]))]
            if include_outliers:
                row.append("1" if data.outlier_flag[i] else "0")
            w.writerow(row)


def drop_flagged_outliers(data: Dataset) -> Dataset:
    keep = np.flatnonzero(~data.outlier_flag)
    if keep.size == 0:
        raise EmptyDataError("every row is flagged as an outlier")
    if keep.size == data.n_rows:
        return data
    return data.take(keep)


@dataclass(frozen=True)
class NormStats:
    mean: dict[str, float]
    sd: dict[str, float]
    fitted_on: int

    @property
    def degenerate_columns(self) -> list[str]:
        return [k for k, s in self.sd.items() if s == 0.0]

    def transform(self, name: str, values) -> np.ndarray:
        values = np.asarray(values, dtype=float)
        sd = self.sd[name]
        centered = values - self.mean[name]
        return centered / sd if sd > 0 else np.zeros_like(centered)

    def inverse(self, name: str, values) -> np.ndarray:
        return np.asarray(values, dtype=float) * self.sd[name] + self.mean[name]

    def to_dict(self) -> dict:
        return {"mean": dict(self.mean), "sd": dict(self.sd), "fitted_on": self.fitted_on}

    @classmethod
    def from_dict(cls, d: dict) -> "NormStats":
        return cls({k: float(v) for k, v in d["mean"].items()},
                   {k: float(v) for k, v in d["sd"].items()},
                   int(d["fitted_on"]))


def zscore_fit(data: Dataset, rows=None) -> NormStats:
    """Sample mean and standard deviation (divisor n-1) of every column over ``rows``."""
    rows = np.arange(data.n_rows) if rows is None else np.asarray(rows, dtype=np.int64)
    if rows.size < 2:
        raise InsufficientDataError("need at least 2 rows to estimate a standard deviation")
    mean, sd = {}, {}
    for name, col in [*data.columns.items(), (TARGET, data.target)]:
        v = col[rows]
        m = float(np.mean(v))
        mean[name] = m
        sd[name] = float(np.sqrt(np.sum((v - m) ** 2) / (v.size - 1)))
    return NormStats(mean, sd, int(rows.size))


def zscore_apply(data: Dataset, stats: NormStats) -> Dataset:
    missing = [k for k in [*data.columns, TARGET] if k not in stats.mean]
    if missing:
        raise MissingFeatureError(missing[0])
    degenerate = [k for k in stats.degenerate_columns if k in data.columns or k == TARGET]
    if degenerate:
        warnings.warn(f"zero-variance columns mapped to 0: {', '.join(degenerate)}",
                      DegenerateWarning, stacklevel=2)
    return Dataset(
        {k: stats.transform(k, v) for k, v in data.columns.items()},
        stats.transform(TARGET, data.target),
        data.outlier_flag,
    )


def zscore_invert(data: Dataset, stats: NormStats) -> Dataset:
    return Dataset(
        {k: stats.inverse(k, v) for k, v in data.columns.items()},
        stats.inverse(TARGET, data.target),
        data.outlier_flag,
    )


@dataclass(frozen=True)
class SplitIndices:
    train: np.ndarray
    validation: np.ndarray
    test: np.ndarray
    seed: int
    n: int = field(default=0)

    def to_dict(self) -> dict:
        return {"seed": self.seed, "n": self.n, "train": self.train.tolist(),
                "validation": self.validation.tolist(), "test": self.test.tolist()}


def split_sizes(n: int) -> tuple[int, int, int]:
    n_test = int(round(0.2 * n))
    n_val = int(round(0.2 * (n - n_test)))
    return n - n_test - n_val, n_val, n_test


def fisher_yates(n: int, seed: int) -> np.ndarray:
    """Shuffle of 0..n-1. Swap positions come from a PCG64 stream, so the
    result depends only on (n, seed)."""
    perm = np.arange(n)
    if n < 2:
        return perm
    rng = np.random.Generator(np.random.PCG64(seed))
    # position i swaps with a uniform draw from [0, i]
    js = rng.integers(0, np.arange(n, 1, -1))
    for i, j in zip(range(n - 1, 0, -1), js.tolist()):
        perm[i], perm[j] = perm[j], perm[i]
    return perm


def split_dataset(n: int, seed: int) -> SplitIndices:
    """Random 64/16/20 train/validation/test partition of ``range(n)``."""
    if n < 5:
        raise InsufficientDataError(f"need at least 5 rows to split, got {n}")
    n_train, n_val, n_test = split_sizes(n)
    perm = fisher_yates(n, seed)
    test = np.sort(perm[:n_test])
    validation = np.sort(perm[n_test:n_test + n_val])
    train = np.sort(perm[n_test + n_val:])
    return SplitIndices(train, validation, test, seed, n)
