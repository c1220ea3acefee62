"""Per-cell regressors: constants (cell means) and clipped Gaussian kernel ridge.

Each partition cell is fit independently.  Constant cells store the
arithmetic mean of their targets; kernel cells solve the regularized system
``(K + n * lambda2 * I) alpha = y`` where ``n`` is the global training size
(the squared loss is averaged over all samples while each cell carries its
own norm penalty, so the per-cell normal equations scale the ridge by the
global count, not the cell count).  Predictions are clipped to
``[-clip_bound, clip_bound]``, which can never increase squared-error risk
when the targets themselves lie in that interval.
"""

from __future__ import annotations

from dataclasses import dataclass

import numpy as np

from .errors import ConfigError
from .linalg import gaussian_cross, gaussian_gram, solve_spd

NO_CELL = -1


def clip(t: float, bound: float) -> float:
    """Clamp t to [-bound, bound]."""
    if bound <= 0:
        raise ConfigError("clip bound must be positive")
    return min(max(t, -bound), bound)


@dataclass
class ConstantModel:
    """One constant per cell, plus a fallback for cells unseen in training."""

    values: np.ndarray
    fallback: float = 0.0

    @property
    def n_cells(self) -> int:
        return len(self.values)

    def predict(self, cells: np.ndarray, X: np.ndarray | None = None) -> np.ndarray:
        cells = np.asarray(cells, dtype=np.int64)
        out = np.full(len(cells), self.fallback, dtype=np.float64)
        seen = cells != NO_CELL
        out[seen] = self.values[cells[seen]]
        return out


@dataclass
class KernelCell:
    """Fitted state of one cell: kernel expansion or a plain mean.

    Cells below the small-cell threshold skip the kernel solve and keep
    their mean (``support is None``); a one- or two-point kernel expansion
    is a shrunk constant anyway.
    """

    gamma: float
    support: np.ndarray | None = None
    alpha: np.ndarray | None = None
    mean: float = 0.0

    @property
    def is_kernel(self) -> bool:
        return self.support is not None


@dataclass
class KernelCellModel:
    """Per-cell Gaussian kernel ridge regressors with shared parameters."""

    cells: list[KernelCell]
    lambda2: float
    clip_bound: float
    n_train: int
    fallback: float = 0.0

    @property
    def n_cells(self) -> int:
        return len(self.cells)

    def predict(
        self, cells: np.ndarray, X: np.ndarray, clipped: bool = True
    ) -> np.ndarray:
        """Evaluate the local regressors; ``clipped=False`` exposes raw values."""
        cells = np.asarray(cells, dtype=np.int64)
        X = np.asarray(X, dtype=np.float64)
        out = np.full(len(cells), self.fallback, dtype=np.float64)
        if len(cells) == 0:
            return out
        order = np.argsort(cells, kind="stable")
        sorted_cells = cells[order]
        boundaries = np.flatnonzero(np.diff(sorted_cells)) + 1
        for group in np.split(order, boundaries):
            cid = int(cells[group[0]])
            if cid == NO_CELL:
                continue
            cell = self.cells[cid]
            if cell.is_kernel:
                k = gaussian_cross(X[group], cell.support, cell.gamma)
                out[group] = k @ cell.alpha
            else:
                out[group] = cell.mean
        if clipped:
            np.clip(out, -self.clip_bound, self.clip_bound, out=out)
        return out


def fit_constant(
    cell_ids: np.ndarray,
    y: np.ndarray,
    n_cells: int,
    fallback: float = 0.0,
    clip_bound: float | None = None,
) -> ConstantModel:
    """Cell means over the training targets.

    Every cell id in 0..n_cells-1 must occur at least once.  When a clip
    bound is given the stored constants are clamped to it.
    """
    cell_ids = np.asarray(cell_ids, dtype=np.int64)
    y = np.asarray(y, dtype=np.float64)
    counts = np.bincount(cell_ids, minlength=n_cells)
    if (counts == 0).any():
        raise ConfigError("every cell must contain at least one sample")
    sums = np.bincount(cell_ids, weights=y, minlength=n_cells)
    values = sums / counts
    if clip_bound is not None:
        values = np.clip(values, -clip_bound, clip_bound)
    return ConstantModel(values=values, fallback=fallback)


def fit_kernel_cell(
    X_cell: np.ndarray,
    y_cell: np.ndarray,
    gamma: float,
    lambda2: float,
    n_global: int,
) -> tuple[np.ndarray, np.ndarray]:
    """Solve one cell's kernel ridge system; returns (support, alpha).

    alpha solves (K + n_global * lambda2 * I) alpha = y_cell with K the
    Gaussian Gram matrix of the cell's points, the representer-theorem
    minimizer of lambda2 * ||f||^2 + (1/n_global) * sum of squared errors.
    """
    X_cell = np.atleast_2d(np.asarray(X_cell, dtype=np.float64))
    y_cell = np.asarray(y_cell, dtype=np.float64)
    if len(X_cell) != len(y_cell) or len(y_cell) == 0:
        raise ConfigError("cell data must be non-empty and consistent")
    if gamma <= 0 or lambda2 <= 0:
        raise ConfigError("gamma and lambda2 must be positive")
    if n_global < len(y_cell):
        raise ConfigError("global sample count smaller than the cell count")
    K = gaussian_gram(X_cell, gamma)
    K[np.diag_indices_from(K)] += n_global * lambda2
    report = solve_spd(K, y_cell)
    return X_cell.copy(), report.solution


def predict_cell(
    model: ConstantModel | KernelCellModel, cell: int | None, x: np.ndarray
) -> float:
    """Single-point prediction for an assigned cell (None means unseen)."""
    cells = np.array([NO_CELL if cell is None else cell], dtype=np.int64)
    x = np.asarray(x, dtype=np.float64)
    return float(model.predict(cells, x[None, :])[0])
