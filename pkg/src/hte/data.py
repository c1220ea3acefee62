"""Data ingestion, standardization, splits, scale heuristic, synthetic generators."""

from __future__ import annotations

import csv
import math
from dataclasses import dataclass

import numpy as np

from .errors import ConfigError, DataError
from .rng import STREAM_DATA, STREAM_DATA_SPLIT, philox_generator, standard_normal

NOISE_STD = 0.1  # observation noise of both synthetic generators


@dataclass
class Dataset:
    """Columnar numeric data: features X (n, d) and target y (n,)."""

    X: np.ndarray
    y: np.ndarray
    feature_names: list[str] | None = None

    def __post_init__(self):
        X = np.asarray(self.X, dtype=np.float64)
        y = np.asarray(self.y, dtype=np.float64)
        if X.ndim != 2 or y.ndim != 1 or len(X) != len(y):
            raise DataError("X must be (n, d) and y (n,) with matching n")
        if len(y) < 1:
            raise DataError("dataset is empty")
        if not np.isfinite(X).all() or not np.isfinite(y).all():
            raise DataError("dataset contains non-finite entries")
        if self.feature_names is not None and len(self.feature_names) != X.shape[1]:
            raise DataError("feature name count != feature count")
        self.X = X
        self.y = y

    @property
    def n(self) -> int:
        return len(self.y)

    @property
    def d(self) -> int:
        return self.X.shape[1]


@dataclass
class Standardizer:
    """Per-feature zero-mean unit-variance scaling, optional target scaling.

    Constant columns (and single-row fits) keep std 1 so they pass through
    unchanged.  Stored stats use the sample standard deviation (ddof=1).
    """

    mean: np.ndarray
    std: np.ndarray
    target_mean: float | None = None
    target_std: float | None = None

    @classmethod
    def fit(cls, X: np.ndarray, y: np.ndarray | None = None) -> "Standardizer":
        X = np.asarray(X, dtype=np.float64)
        mean = X.mean(axis=0)
        if len(X) > 1:
            std = X.std(axis=0, ddof=1)
        else:
            std = np.zeros(X.shape[1])
        std = np.where(std == 0.0, 1.0, std)
        target_mean = target_std = None
        if y is not None:
            y = np.asarray(y, dtype=np.float64)
            target_mean = float(y.mean())
            target_std = float(y.std(ddof=1)) if len(y) > 1 else 1.0
            if target_std == 0.0:
                target_std = 1.0
        return cls(mean, std, target_mean, target_std)

    @classmethod
    def identity(cls, d: int) -> "Standardizer":
        return cls(np.zeros(d), np.ones(d))

    @property
    def scales_target(self) -> bool:
        return self.target_mean is not None

    def transform(self, X: np.ndarray) -> np.ndarray:
        X = np.asarray(X, dtype=np.float64)
        if X.shape[-1] != len(self.mean):
            raise DataError(f"expected {len(self.mean)} features, got {X.shape[-1]}")
        return (X - self.mean) / self.std

    def inverse_transform(self, X: np.ndarray) -> np.ndarray:
        return np.asarray(X, dtype=np.float64) * self.std + self.mean

    def transform_target(self, y: np.ndarray) -> np.ndarray:
        y = np.asarray(y, dtype=np.float64)
        if not self.scales_target:
            return y
        return (y - self.target_mean) / self.target_std

    def inverse_target(self, y: np.ndarray) -> np.ndarray:
        y = np.asarray(y, dtype=np.float64)
        if not self.scales_target:
            return y
        return y * self.target_std + self.target_mean


def fit_standardizer(dataset: Dataset, scale_target: bool = False) -> Standardizer:
    return Standardizer.fit(dataset.X, dataset.y if scale_target else None)


def load_csv(path, target: str | int, has_header: bool = True) -> Dataset:
    """Read a numeric CSV; the target column becomes y, the rest X in file order.

    The target is a header name (requires a header) or a 0-based column
    index.  Any cell that does not parse as a finite decimal number is a
    hard error reported with its 1-based row and column.
    """
    with open(path, newline="", encoding="utf-8") as fh:
        rows = [row for row in csv.reader(fh) if row]
    if not rows:
        raise DataError(f"{path}: empty file")
    header: list[str] | None = None
    if has_header:
        header = [c.strip() for c in rows[0]]
        rows = rows[1:]
        if not rows:
            raise DataError(f"{path}: no data rows after header")
    width = len(rows[0])
    if isinstance(target, str):
        if header is None:
            raise ConfigError("target given by name but the file has no header")
        if target not in header:
            raise DataError(f"{path}: target column {target!r} not found in header")
        target_idx = header.index(target)
    else:
        target_idx = int(target)
        if not 0 <= target_idx < width:
            raise DataError(
                f"{path}: target index {target_idx} out of range for {width} columns"
            )
    if width < 2:
        raise DataError(f"{path}: need at least one feature column besides the target")

    offset = 2 if has_header else 1
    values = np.empty((len(rows), width), dtype=np.float64)
    for r, row in enumerate(rows):
        if len(row) != width:
            raise DataError(
                f"{path}: row {r + offset} has {len(row)} cells, expected {width}"
            )
        for c, cell in enumerate(row):
            try:
                v = float(cell.strip())
            except ValueError:
                v = math.nan
            if not math.isfinite(v):
                raise DataError(
                    f"{path}: non-numeric value {cell.strip()!r} "
                    f"at row {r + offset}, column {c + 1}"
                )
            values[r, c] = v

    feature_cols = [c for c in range(width) if c != target_idx]
    names = [header[c] for c in feature_cols] if header else None
    return Dataset(values[:, feature_cols], values[:, target_idx], names)


def default_scale(X: np.ndarray) -> tuple[float, float]:
    """Default bin width and its inverse from the data spread.

    sigma is the root mean sample variance across features; the heuristic
    bin width is 3.5 * sigma * n**(-1/(2+d)) and the scale is its inverse.
    """
    X = np.atleast_2d(np.asarray(X, dtype=np.float64))
    n, d = X.shape
    if n < 2:
        raise DataError("scale heuristic needs at least 2 samples")
    sigma = math.sqrt(float(X.var(axis=0, ddof=1).mean()))
    if sigma == 0.0:
        raise DataError("all points identical: scale heuristic degenerate")
    h_hat = 3.5 * sigma * n ** (-1.0 / (2 + d))
    return h_hat, 1.0 / h_hat


def sin16_truth(x: np.ndarray) -> np.ndarray:
    """Noiseless regression surface of the 1-d sine benchmark."""
    return np.sin(16.0 * np.asarray(x, dtype=np.float64)).ravel()


def counter3d_truth(X: np.ndarray) -> np.ndarray:
    """Noiseless regression surface of the 3-d benchmark."""
    X = np.atleast_2d(np.asarray(X, dtype=np.float64))
    return (10.0 * X * np.sin(2.0 * X - 3.0)).sum(axis=1)


def gen_sin16(n: int, seed: int) -> Dataset:
    """y = sin(16 x) + noise with x uniform on [0, 1], noise N(0, 0.1^2)."""
    if n < 1:
        raise DataError("need n >= 1")
    rng = philox_generator(seed, STREAM_DATA)
    X = rng.random((n, 1))
    y = sin16_truth(X) + NOISE_STD * standard_normal(rng, n)
    return Dataset(X, y, ["x"])


def gen_counter3d(n: int, seed: int) -> Dataset:
    """y = sum_i 10 x_i sin(2 x_i - 3) + noise on the unit cube, noise N(0, 0.1^2)."""
    if n < 1:
        raise DataError("need n >= 1")
    rng = philox_generator(seed, STREAM_DATA)
    X = rng.random((n, 3))
    y = counter3d_truth(X) + NOISE_STD * standard_normal(rng, n)
    return Dataset(X, y, ["x1", "x2", "x3"])


def split_dataset(
    dataset: Dataset, fraction: float, seed: int
) -> tuple[Dataset, Dataset]:
    """Deterministic shuffled split; the first part gets ceil(fraction * n) rows."""
    if not 0.0 < fraction < 1.0:
        raise ConfigError("split fraction must lie strictly between 0 and 1")
    n = dataset.n
    # small bias guard so an exact product like 0.7 * 10 still ceils to 7
    n_first = int(math.ceil(fraction * n - 1e-9))
    if n_first < 1 or n_first >= n:
        raise DataError(f"split of {n} rows at fraction {fraction} leaves a side empty")
    perm = philox_generator(seed, STREAM_DATA_SPLIT).permutation(n)
    first, second = perm[:n_first], perm[n_first:]
    names = dataset.feature_names
    return (
        Dataset(dataset.X[first], dataset.y[first], names),
        Dataset(dataset.X[second], dataset.y[second], names),
    )
