"""Soft-margin RBF SVM: a binary SMO dual solver and a one-vs-one ensemble.

The binary solver maximizes ``sum(a) - 1/2 a'Qa`` with ``Q_ij = y_i y_j K(x_i, x_j)`` subject to
``0 <= a_i <= C`` and ``sum(a_i y_i) = 0``. Each iteration updates one pair chosen by the
second-order working-set rule (maximal violating ``i``, best predicted gain ``j``); the bias is the
mean KKT value over free support vectors, or the midpoint of the bound-derived interval when
none are free.
"""

from __future__ import annotations

import itertools
import logging
from collections import OrderedDict
from dataclasses import dataclass, field

import numpy as np

from ews_svm_heuristics.constants import (
    ALPHA_EPS,
    KERNEL_CACHE_ROWS,
    SOLVER_MAX_PASSES,
    SOLVER_TOLERANCE,
    TAU,
)
from ews_svm_heuristics.errors import SolverError
from ews_svm_heuristics.heuristics import SvmParams
from ews_svm_heuristics.kernel import kernel_matrix

logger = logging.getLogger(__name__)


@dataclass(frozen=True)
class SolverConfig:
    """Stopping rule and cache sizing.

    ``max_passes`` caps the solver at ``max_passes * m`` pair updates. ``seed`` is recorded with
    the config for provenance; pair selection itself is deterministic.
    ``track_objective`` records the dual objective after every update.
    """

    tolerance: float = SOLVER_TOLERANCE
    max_passes: int = SOLVER_MAX_PASSES
    seed: int = 0
    cache_rows: int = KERNEL_CACHE_ROWS
    track_objective: bool = False

    def __post_init__(self):
        if not self.tolerance > 0:
            raise SolverError(f"tolerance must be positive, got {self.tolerance}")
        if self.max_passes < 1:
            raise SolverError(f"max_passes must be >= 1, got {self.max_passes}")
        if self.cache_rows < 2:
            raise SolverError(f"cache_rows must be >= 2, got {self.cache_rows}")


class KernelCache:
    """Kernel rows for one training set.

    Holds the whole Gram matrix when it has at most ``capacity`` rows (or one is supplied);
    otherwise computes rows on demand and keeps the ``capacity`` most recently used.
    """

    def __init__(
        self,
        features: np.ndarray,
        gamma: float,
        capacity: int = KERNEL_CACHE_ROWS,
        gram: np.ndarray | None = None,
    ):
        self.features = features
        self.gamma = gamma
        self.capacity = capacity
        self._rows: OrderedDict[int, np.ndarray] = OrderedDict()
        m = features.shape[0]
        if gram is not None:
            if gram.shape != (m, m):
                raise SolverError(f"gram matrix shape {gram.shape} does not match m={m}")
            self._full = gram
        elif m <= capacity:
            self._full = kernel_matrix(features, features, gamma)
        else:
            self._full = None
        self.hits = 0
        self.misses = 0

    def row(self, i: int) -> np.ndarray:
        if self._full is not None:
            return self._full[i]
        cached = self._rows.get(i)
        if cached is not None:
            self._rows.move_to_end(i)
            self.hits += 1
            return cached
        self.misses += 1
        row = kernel_matrix(self.features[i : i + 1], self.features, self.gamma)[0]
        self._rows[i] = row
        if len(self._rows) > self.capacity:
            self._rows.popitem(last=False)
        return row


@dataclass(frozen=True, eq=False)
class BinaryModel:
    support_vectors: np.ndarray
    coefficients: np.ndarray  # alpha_i * y_i
    bias: float
    gamma: float
    positive_class: int = 1
    negative_class: int = -1
    c: float = 1.0
    support_indices: np.ndarray = field(default_factory=lambda: np.empty(0, dtype=np.int64))
    converged: bool = True
    iterations: int = 0
    dual_objective: float = float("nan")
    objective_trace: tuple[float, ...] = ()

    @property
    def n_support(self) -> int:
        return self.coefficients.shape[0]

    def decision_values(self, features: np.ndarray) -> np.ndarray:
        x = np.atleast_2d(np.asarray(features, dtype=np.float64))
        if x.shape[1] != self.support_vectors.shape[1]:
            raise ValueError(
                f"model expects {self.support_vectors.shape[1]} features, got {x.shape[1]}"
            )
        return kernel_matrix(x, self.support_vectors, self.gamma) @ self.coefficients + self.bias


@dataclass(frozen=True, eq=False)
class MulticlassModel:
    binaries: tuple[BinaryModel, ...]
    n_classes: int
    params: SvmParams

    @property
    def pairs(self) -> list[tuple[int, int]]:
        return [(b.positive_class, b.negative_class) for b in self.binaries]

    @property
    def converged(self) -> bool:
        return all(b.converged for b in self.binaries)


def _dual_objective(alpha: np.ndarray, grad: np.ndarray) -> float:
    # grad = Q a - e, so a'Qa = a'(grad + e)
    return float(alpha.sum() - 0.5 * alpha @ (grad + 1.0))


def _bias(alpha: np.ndarray, y: np.ndarray, grad: np.ndarray, c: float) -> float:
    yg = y * grad
    upper = alpha >= c
    lower = alpha <= 0
    free = ~(upper | lower)
    if free.any():
        rho = float(yg[free].mean())
    else:
        ub_mask = (upper & (y < 0)) | (lower & (y > 0))
        lb_mask = (upper & (y > 0)) | (lower & (y < 0))
        ub = float(yg[ub_mask].min()) if ub_mask.any() else np.inf
        lb = float(yg[lb_mask].max()) if lb_mask.any() else -np.inf
        rho = 0.5 * (ub + lb)
    return -rho


def train_binary(
    features: np.ndarray,
    signs: np.ndarray,
    params: SvmParams,
    config: SolverConfig | None = None,
    *,
    gram: np.ndarray | None = None,
    positive_class: int = 1,
    negative_class: int = -1,
) -> BinaryModel:
    """Solve the soft-margin dual for labels in {-1, +1}.

    Hitting the iteration cap is not an error: the last iterate comes back with
    ``converged=False`` and a warning is logged.
    """
    config = config or SolverConfig()
    x = np.asarray(features, dtype=np.float64)
    y = np.asarray(signs, dtype=np.float64)
    m = x.shape[0]
    if y.shape != (m,):
        raise SolverError(f"{y.shape[0]} signs for {m} examples")
    if not np.all(np.abs(y) == 1):
        raise SolverError("signs must be +1 or -1")
    if not (np.any(y > 0) and np.any(y < 0)):
        raise SolverError("both +1 and -1 examples are required")

    c = params.c
    cache = KernelCache(x, params.gamma, config.cache_rows, gram=gram)
    alpha = np.zeros(m)
    grad = -np.ones(m)
    trace: list[float] = []
    max_iter = config.max_passes * m
    converged = False
    iterations = 0

    while iterations < max_iter:
        yg = -y * grad
        up = np.where(y > 0, alpha < c, alpha > 0)
        low = np.where(y > 0, alpha > 0, alpha < c)
        i = int(np.argmax(np.where(up, yg, -np.inf)))
        g_max = yg[i]
        g_min = np.min(np.where(low, yg, np.inf))
        if g_max - g_min < config.tolerance:
            converged = True
            break

        k_i = cache.row(i)
        gain = g_max - yg
        curvature = np.maximum(2.0 - 2.0 * k_i, TAU)
        score = np.where(low & (gain > 0), -(gain * gain) / curvature, np.inf)
        j = int(np.argmin(score))
        k_j = cache.row(j)

        a_i, a_j = alpha[i], alpha[j]
        quad = max(2.0 - 2.0 * k_i[j], TAU)
        if y[i] != y[j]:
            delta = (-grad[i] - grad[j]) / quad
            diff = a_i - a_j
            new_i, new_j = a_i + delta, a_j + delta
            if diff > 0:
                if new_j < 0:
                    new_j, new_i = 0.0, diff
            elif new_i < 0:
                new_i, new_j = 0.0, -diff
            if diff > 0:
                if new_i > c:
                    new_i, new_j = c, c - diff
            elif new_j > c:
                new_j, new_i = c, c + diff
        else:
            delta = (grad[i] - grad[j]) / quad
            total = a_i + a_j
            new_i, new_j = a_i - delta, a_j + delta
            if total > c:
                if new_i > c:
                    new_i, new_j = c, total - c
            elif new_j < 0:
                new_j, new_i = 0.0, total
            if total > c:
                if new_j > c:
                    new_j, new_i = c, total - c
            elif new_i < 0:
                new_i, new_j = 0.0, total

        alpha[i], alpha[j] = new_i, new_j
        grad += y * (y[i] * (new_i - a_i) * k_i + y[j] * (new_j - a_j) * k_j)
        iterations += 1
        if config.track_objective:
            trace.append(_dual_objective(alpha, grad))

    if not converged:
        logger.warning(
            "SMO did not converge: classes (%s, %s), C=%.3g, gamma=%.3g, %d updates",
            positive_class,
            negative_class,
            c,
            params.gamma,
            iterations,
        )

    support = np.flatnonzero(alpha > ALPHA_EPS * c)
    return BinaryModel(
        support_vectors=x[support],
        coefficients=alpha[support] * y[support],
        bias=_bias(alpha, y, grad, c),
        gamma=params.gamma,
        positive_class=positive_class,
        negative_class=negative_class,
        c=c,
        support_indices=support,
        converged=converged,
        iterations=iterations,
        dual_objective=_dual_objective(alpha, grad),
        objective_trace=tuple(trace),
    )


def decision_value(model: BinaryModel, x) -> float:
    """``sum(coef_i K(x, sv_i)) + b`` for one example."""
    return float(model.decision_values(np.asarray(x, dtype=np.float64).reshape(1, -1))[0])


def train_ovo(
    features: np.ndarray,
    labels: np.ndarray,
    params: SvmParams,
    config: SolverConfig | None = None,
    *,
    n_classes: int | None = None,
    gram: np.ndarray | None = None,
) -> MulticlassModel:
    """One binary model per class pair; the lower class index is the +1 side.

    ``gram`` is an optional precomputed kernel matrix over ``features`` at ``params.gamma``.
    """
    x = np.asarray(features, dtype=np.float64)
    y = np.asarray(labels, dtype=np.int64)
    present = np.unique(y)
    if present.size < 2:
        raise SolverError(f"need at least 2 classes to train, got {present.tolist()}")
    n_classes = n_classes or int(y.max()) + 1

    binaries = []
    for p, q in itertools.combinations(present.tolist(), 2):
        rows = np.flatnonzero((y == p) | (y == q))
        sub_gram = None if gram is None else gram[np.ix_(rows, rows)]
        binaries.append(
            train_binary(
                x[rows],
                np.where(y[rows] == p, 1.0, -1.0),
                params,
                config,
                gram=sub_gram,
                positive_class=p,
                negative_class=q,
            )
        )
    return MulticlassModel(binaries=tuple(binaries), n_classes=n_classes, params=params)


def predict_many(model: MulticlassModel, features: np.ndarray) -> np.ndarray:
    """Majority vote; ties go to the class whose won votes carry the largest summed
    ``|decision value|``, then to the lowest class index."""
    x = np.atleast_2d(np.asarray(features, dtype=np.float64))
    n = x.shape[0]
    votes = np.zeros((n, model.n_classes))
    confidence = np.zeros((n, model.n_classes))
    rows = np.arange(n)
    for binary in model.binaries:
        dv = binary.decision_values(x)
        winner = np.where(dv > 0, binary.positive_class, binary.negative_class)
        votes[rows, winner] += 1
        confidence[rows, winner] += np.abs(dv)
    leaders = votes == votes.max(axis=1, keepdims=True)
    return np.argmax(np.where(leaders, confidence, -np.inf), axis=1)


def predict(model: MulticlassModel, x) -> int:
    return int(predict_many(model, np.asarray(x, dtype=np.float64).reshape(1, -1))[0])
