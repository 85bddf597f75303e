"""k-nearest-neighbour regression and classification.

Features are z-scored with the training mean and sample standard deviation
(ddof=1); constant columns get unit scale so they contribute nothing to the
distance. Neighbour ties at equal distance resolve to the lowest training-row
index, class-vote ties to the lowest class level.
"""

from __future__ import annotations

from dataclasses import dataclass

import numpy as np

# Query rows are scored in blocks to bound the distance-matrix allocation.
_BLOCK = 256


@dataclass(frozen=True)
class KnnFit:
    k: int
    mean: np.ndarray
    scale: np.ndarray
    train_x: np.ndarray  # standardized training features
    train_y: np.ndarray  # floats (regression) or class codes (classification)


def fit_knn(X: np.ndarray, y: np.ndarray, k: int) -> KnnFit:
    n = X.shape[0]
    if k < 1:
        raise ValueError("k must be at least 1")
    if k > n:
        raise ValueError(f"k={k} exceeds the {n} training rows")
    mean = X.mean(axis=0)
    if n > 1:
        scale = X.std(axis=0, ddof=1)
        scale = np.where(scale == 0.0, 1.0, scale)
    else:
        scale = np.ones(X.shape[1], dtype=np.float64)
    return KnnFit(k=int(k), mean=mean.astype(np.float64), scale=scale.astype(np.float64),
                  train_x=(X - mean) / scale, train_y=np.asarray(y, dtype=np.float64))


def _neighbours(fit: KnnFit, X: np.ndarray) -> np.ndarray:
    """Indices of the k nearest training rows per query row, (n, k)."""
    Z = (np.asarray(X, dtype=np.float64) - fit.mean) / fit.scale
    out = np.empty((Z.shape[0], fit.k), dtype=np.int64)
    for start in range(0, Z.shape[0], _BLOCK):
        block = Z[start:start + _BLOCK]
        diff = block[:, None, :] - fit.train_x[None, :, :]
        d2 = np.einsum("ijk,ijk->ij", diff, diff)
        # Stable sort keeps equal-distance ties on the lowest row index.
        out[start:start + _BLOCK] = np.argsort(d2, axis=1, kind="stable")[:, :fit.k]
    return out


def predict_knn_regression(fit: KnnFit, X: np.ndarray) -> np.ndarray:
    nn = _neighbours(fit, X)
    return fit.train_y[nn].mean(axis=1)


def predict_knn_classification(fit: KnnFit, X: np.ndarray, n_classes: int) -> tuple[np.ndarray, np.ndarray]:
    """Return (predicted class codes, per-class vote fractions)."""
    nn = _neighbours(fit, X)
    codes = fit.train_y.astype(np.int64)[nn]
    counts = np.zeros((X.shape[0], n_classes), dtype=np.float64)
    for j in range(fit.k):
        np.add.at(counts, (np.arange(X.shape[0]), codes[:, j]), 1.0)
    # argmax takes the first maximum, i.e. the lowest class level on ties.
    return counts.argmax(axis=1), counts / fit.k
