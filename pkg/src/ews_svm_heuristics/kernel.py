"""Euclidean distances, distance sampling, type-7 quantiles and the Gaussian RBF kernel."""

from __future__ import annotations

from collections.abc import Iterator
from dataclasses import dataclass

import numpy as np
from scipy.spatial.distance import cdist, pdist

from ews_svm_heuristics.constants import PAIR_BUDGET

# Rows per block when a full m x m matrix would not fit comfortably in memory.
BLOCK_ROWS = 1024


@dataclass(frozen=True, eq=False)
class DistanceSample:
    """Euclidean distances over unordered example pairs (all of them, or a seeded subset)."""

    values: np.ndarray
    exhaustive: bool
    pair_budget: int
    seed: int

    def __post_init__(self):
        if self.values.size == 0:
            raise ValueError("distance sample is empty")
        if not np.all(np.isfinite(self.values)) or np.any(self.values < 0):
            raise ValueError("distances must be finite and non-negative")
        self.values.setflags(write=False)


def _vector(x) -> np.ndarray:
    return np.asarray(x, dtype=np.float64).ravel()


def squared_euclidean(x, y) -> float:
    x, y = _vector(x), _vector(y)
    if x.shape != y.shape:
        raise ValueError(f"length mismatch: {x.size} vs {y.size}")
    diff = x - y
    return float(diff @ diff)


def rbf_kernel(x, y, gamma: float) -> float:
    if not gamma > 0:
        raise ValueError(f"gamma must be positive, got {gamma}")
    return float(np.exp(-gamma * squared_euclidean(x, y)))


def squared_distances(a: np.ndarray, b: np.ndarray) -> np.ndarray:
    a = np.atleast_2d(np.asarray(a, dtype=np.float64))
    b = np.atleast_2d(np.asarray(b, dtype=np.float64))
    if a.shape[1] != b.shape[1]:
        raise ValueError(f"feature count mismatch: {a.shape[1]} vs {b.shape[1]}")
    return cdist(a, b, metric="sqeuclidean")


def kernel_matrix(a: np.ndarray, b: np.ndarray, gamma: float) -> np.ndarray:
    """``K[i, j] = exp(-gamma * ||a_i - b_j||^2)``."""
    if not gamma > 0:
        raise ValueError(f"gamma must be positive, got {gamma}")
    return np.exp(-gamma * squared_distances(a, b))


def row_blocks(m: int, block: int = BLOCK_ROWS) -> Iterator[slice]:
    for start in range(0, m, block):
        yield slice(start, min(m, start + block))


def _condensed_to_pairs(k: np.ndarray, m: int) -> tuple[np.ndarray, np.ndarray]:
    """Map condensed (row-major, i < j) pair indices back to ``(i, j)``."""
    k = np.asarray(k, dtype=np.int64)
    b = 2 * m - 1
    i = np.floor((b - np.sqrt(b * b - 8.0 * k)) / 2).astype(np.int64)

    def start(r):
        return r * (2 * m - r - 1) // 2

    # float sqrt can land one row off near row boundaries
    i = np.where(start(i + 1) <= k, i + 1, i)
    i = np.where(start(i) > k, i - 1, i)
    j = k - start(i) + i + 1
    return i, j


def pairwise_distances(
    features: np.ndarray, pair_budget: int = PAIR_BUDGET, seed: int = 0
) -> DistanceSample:
    """All unordered-pair distances when there are at most ``pair_budget`` pairs, otherwise
    ``pair_budget`` pairs drawn uniformly without replacement."""
    x = np.asarray(features, dtype=np.float64)
    m = x.shape[0]
    if m < 2:
        raise ValueError(f"need at least 2 examples for pairwise distances, got {m}")
    if pair_budget < 1:
        raise ValueError(f"pair_budget must be >= 1, got {pair_budget}")

    total = m * (m - 1) // 2
    if total <= pair_budget:
        return DistanceSample(pdist(x), exhaustive=True, pair_budget=pair_budget, seed=seed)

    rng = np.random.default_rng(seed)
    picked = np.sort(rng.choice(total, size=pair_budget, replace=False))
    i, j = _condensed_to_pairs(picked, m)
    values = np.linalg.norm(x[i] - x[j], axis=1)
    return DistanceSample(values, exhaustive=False, pair_budget=pair_budget, seed=seed)


def quantile(values, q: float) -> float:
    """Type-7 quantile: linear interpolation between order statistics at ``h = (n-1) q``."""
    v = np.asarray(values, dtype=np.float64).ravel()
    if v.size == 0:
        raise ValueError("quantile of an empty sequence")
    if not 0.0 <= q <= 1.0:
        raise ValueError(f"q must be in [0, 1], got {q}")
    return float(np.quantile(v, q, method="linear"))


def nearest_neighbor_distances(features: np.ndarray, labels: np.ndarray | None = None):
    """Distance from every example to its nearest other example.

    With ``labels``, only examples of a different class count as neighbours.
    """
    x = np.asarray(features, dtype=np.float64)
    m = x.shape[0]
    if m < 2:
        raise ValueError(f"need at least 2 examples, got {m}")
    y = None if labels is None else np.asarray(labels)
    out = np.empty(m)
    for rows in row_blocks(m):
        d2 = cdist(x[rows], x, metric="sqeuclidean")
        idx = np.arange(rows.start, rows.stop)
        d2[idx - rows.start, idx] = np.inf
        if y is not None:
            d2[y[rows][:, None] == y[None, :]] = np.inf
        out[rows] = np.sqrt(d2.min(axis=1))
    if not np.all(np.isfinite(out)):
        raise ValueError("some examples have no admissible neighbour")
    return out
