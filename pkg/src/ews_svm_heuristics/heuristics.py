"""Closed-form estimators of the RBF-SVM parameters (C, gamma).

Every estimator expects standardized features and never re-standardizes. gamma rules:

=============  ================================================================
covtrace       1 / (2 tr Cov(X))
Wang           1 / (2 n)  (covtrace for exactly unit-variance features)
Gelbart        1 / (n Var(all elements of X))
Smola_q        (1 / quantile_q(D))^2, D = pairwise distances (sampled)
Chapelle       1 / (2 quantile_{1/n_c}(D))
Soares         1 / (2 mean(nearest-neighbour distances))
Soares_med     1 / (2 median(nearest-neighbour distances))
Jaakkola       1 / (2 median(nearest other-class distances)^2)   (supervised)
=============  ================================================================

C rules: ``chapelle_c`` (C = 1 / (1 - mean kernel value over all ordered pairs)) and
``modified_chapelle_c`` (same, averaged over the closest pairs only, which raises C as the
dimension grows). Chapelle and Soares_med divide by the unsquared aggregate, as published.
"""

from __future__ import annotations

import math
from collections.abc import Callable
from dataclasses import dataclass
from enum import StrEnum

import numpy as np
from scipy.spatial.distance import pdist

from ews_svm_heuristics.constants import KERNEL_VARIANCE_FLOOR, PAIR_BUDGET
from ews_svm_heuristics.errors import HeuristicError
from ews_svm_heuristics.kernel import (
    DistanceSample,
    kernel_matrix,
    nearest_neighbor_distances,
    pairwise_distances,
    quantile,
    row_blocks,
)


@dataclass(frozen=True)
class SvmParams:
    c: float
    gamma: float

    def __post_init__(self):
        for name, value in (("C", self.c), ("gamma", self.gamma)):
            if not (math.isfinite(value) and value > 0):
                raise HeuristicError(f"{name} must be positive and finite, got {value}")

    def scaled(self, r_gamma: float, r_c: float) -> SvmParams:
        return SvmParams(c=self.c * r_c, gamma=self.gamma * r_gamma)

    def __str__(self) -> str:
        return f"C={self.c:.6g} gamma={self.gamma:.6g}"


DEFAULT = SvmParams(c=1.0, gamma=1.0)


class HeuristicId(StrEnum):
    DEFAULT = "default"
    COVTRACE = "covtrace"
    COVTRACE_C = "covtrace+C"
    COVTRACE_MC = "covtrace+MC"
    WANG = "Wang"
    GELBART = "Gelbart"
    SMOLA_10 = "Smola_10"
    SMOLA_50 = "Smola_50"
    SMOLA_90 = "Smola_90"
    CHAPELLE = "Chapelle"
    SOARES = "Soares"
    SOARES_MED = "Soares_med"
    JAAKKOLA = "Jaakkola"

    @classmethod
    def parse(cls, text: str) -> HeuristicId:
        try:
            return cls(text)
        except ValueError:
            valid = ", ".join(h.value for h in cls)
            raise HeuristicError(f"unknown heuristic {text!r}; valid: {valid}") from None

    @property
    def supervised(self) -> bool:
        return self is HeuristicId.JAAKKOLA


@dataclass(frozen=True, eq=False)
class HeuristicInput:
    features: np.ndarray
    distance_sample: DistanceSample
    labels: np.ndarray | None = None
    n_classes: int | None = None
    seed: int = 0

    def __post_init__(self):
        if not np.all(np.isfinite(self.features)):
            raise HeuristicError("heuristic input contains non-finite features")
        if self.labels is not None and len(self.labels) != self.features.shape[0]:
            raise HeuristicError(
                f"{len(self.labels)} labels for {self.features.shape[0]} examples"
            )

    @classmethod
    def from_features(
        cls,
        features: np.ndarray,
        labels: np.ndarray | None = None,
        n_classes: int | None = None,
        pair_budget: int = PAIR_BUDGET,
        seed: int = 0,
    ) -> HeuristicInput:
        x = np.asarray(features, dtype=np.float64)
        if x.ndim != 2 or x.shape[0] < 2:
            raise HeuristicError(f"heuristics need at least 2 examples, got shape {x.shape}")
        if n_classes is None and labels is not None:
            n_classes = int(np.unique(labels).size)
        return cls(
            features=x,
            distance_sample=pairwise_distances(x, pair_budget=pair_budget, seed=seed),
            labels=None if labels is None else np.asarray(labels),
            n_classes=n_classes,
            seed=seed,
        )


def _positive(value: float, what: str) -> float:
    if not (math.isfinite(value) and value > 0):
        raise HeuristicError(f"{what} is degenerate ({value}); duplicated or constant data?")
    return float(value)


def _matrix(features: np.ndarray, min_rows: int = 2) -> np.ndarray:
    x = np.asarray(features, dtype=np.float64)
    if x.ndim != 2 or x.shape[0] < min_rows or x.shape[1] < 1:
        raise HeuristicError(f"need at least {min_rows} examples, got shape {x.shape}")
    return x


# --------------------------------------------------------------------------------------------
# gamma


def covtrace_gamma(features: np.ndarray) -> float:
    x = _matrix(features)
    trace = _positive(float(x.var(axis=0).sum()), "covariance trace")
    return 1.0 / (2.0 * trace)


def wang_gamma(features: np.ndarray) -> float:
    return 1.0 / (2.0 * _matrix(features).shape[1])


def gelbart_gamma(features: np.ndarray) -> float:
    x = _matrix(features)
    pooled = _positive(float(x.var()), "pooled element variance")
    return 1.0 / (x.shape[1] * pooled)


def smola_gamma(distances: DistanceSample, q: float) -> float:
    scale = _positive(quantile(distances.values, q), f"{q}-quantile of distances")
    return (1.0 / scale) ** 2


# The Smola family; reports also add the best of the three as one "Smola" row.
SMOLA_QUANTILES = {HeuristicId.SMOLA_10: 0.1, HeuristicId.SMOLA_50: 0.5, HeuristicId.SMOLA_90: 0.9}


def chapelle_gamma(distances: DistanceSample, n_classes: int) -> float:
    if n_classes is None or n_classes < 2:
        raise HeuristicError(f"Chapelle gamma needs n_classes >= 2, got {n_classes}")
    q = _positive(quantile(distances.values, 1.0 / n_classes), "1/n_c-quantile of distances")
    return 1.0 / (2.0 * q)


def soares_gamma(features: np.ndarray, aggregate: str = "mean") -> float:
    nn = nearest_neighbor_distances(_matrix(features))
    if aggregate == "mean":
        value = float(nn.mean())
    elif aggregate == "median":
        value = float(np.median(nn))
    else:
        raise HeuristicError(f"aggregate must be 'mean' or 'median', got {aggregate!r}")
    return 1.0 / (2.0 * _positive(value, f"{aggregate} nearest-neighbour distance"))


def jaakkola_gamma(features: np.ndarray, labels: np.ndarray) -> float:
    x = _matrix(features)
    if labels is None:
        raise HeuristicError("Jaakkola is supervised and needs labels")
    y = np.asarray(labels)
    if np.unique(y).size < 2:
        raise HeuristicError("Jaakkola needs at least 2 classes")
    sigma = _positive(float(np.median(nearest_neighbor_distances(x, y))), "median class gap")
    return 1.0 / (2.0 * sigma**2)


# --------------------------------------------------------------------------------------------
# C


def _c_from_mean_kernel(a: float) -> float:
    s2 = 1.0 - a
    if s2 <= KERNEL_VARIANCE_FLOOR:
        raise HeuristicError(f"degenerate kernel variance (s^2 = {s2:.3g})")
    return 1.0 / s2


def chapelle_c(features: np.ndarray, gamma: float) -> float:
    """C = 1/s^2, s^2 = 1 - mean of K over all m^2 ordered pairs (diagonal included)."""
    x = _matrix(features)
    m = x.shape[0]
    total = sum(float(kernel_matrix(x[rows], x, gamma).sum()) for rows in row_blocks(m))
    return _c_from_mean_kernel(total / (m * m))


def modified_chapelle_c(
    features: np.ndarray, gamma: float, distances: DistanceSample | None = None
) -> float:
    """Chapelle's C restricted to close pairs: B = pairs within the 1/n-quantile of pair
    distances, a' = mean of K over B so that a <= a' < 1.

    Without ``distances`` every unordered pair is used; with a sample, B is drawn from it.
    """
    x = _matrix(features)
    if not gamma > 0:
        raise HeuristicError(f"gamma must be positive, got {gamma}")
    dist = pdist(x) if distances is None else distances.values
    threshold = quantile(dist, 1.0 / x.shape[1])
    close = dist[dist <= threshold]
    if close.size == 0:
        raise HeuristicError("no pair distance at or below the 1/n quantile")
    return _c_from_mean_kernel(float(np.exp(-gamma * close**2).mean()))


# --------------------------------------------------------------------------------------------
# dispatch


def _gamma_only(rule: Callable[[HeuristicInput], float]) -> Callable[[HeuristicInput], SvmParams]:
    return lambda inp: SvmParams(c=1.0, gamma=rule(inp))


def _with_chapelle_c(rule, *, modified: bool = False):
    def compose(inp: HeuristicInput) -> SvmParams:
        gamma = rule(inp)
        if modified:
            c = modified_chapelle_c(inp.features, gamma, inp.distance_sample)
        else:
            c = chapelle_c(inp.features, gamma)
        return SvmParams(c=c, gamma=gamma)

    return compose


def _chapelle(inp: HeuristicInput) -> float:
    n_classes = inp.n_classes
    if n_classes is None and inp.labels is not None:
        n_classes = int(np.unique(inp.labels).size)
    return chapelle_gamma(inp.distance_sample, n_classes)


_ESTIMATORS: dict[HeuristicId, Callable[[HeuristicInput], SvmParams]] = {
    HeuristicId.DEFAULT: lambda inp: DEFAULT,
    HeuristicId.COVTRACE: _gamma_only(lambda inp: covtrace_gamma(inp.features)),
    HeuristicId.COVTRACE_C: _with_chapelle_c(lambda inp: covtrace_gamma(inp.features)),
    HeuristicId.COVTRACE_MC: _with_chapelle_c(
        lambda inp: covtrace_gamma(inp.features), modified=True
    ),
    HeuristicId.WANG: _gamma_only(lambda inp: wang_gamma(inp.features)),
    HeuristicId.GELBART: _gamma_only(lambda inp: gelbart_gamma(inp.features)),
    **{
        h: _gamma_only(lambda inp, q=q: smola_gamma(inp.distance_sample, q))
        for h, q in SMOLA_QUANTILES.items()
    },
    HeuristicId.CHAPELLE: _with_chapelle_c(_chapelle),
    HeuristicId.SOARES: _gamma_only(lambda inp: soares_gamma(inp.features, "mean")),
    HeuristicId.SOARES_MED: _gamma_only(lambda inp: soares_gamma(inp.features, "median")),
    HeuristicId.JAAKKOLA: _gamma_only(lambda inp: jaakkola_gamma(inp.features, inp.labels)),
}


def estimate(heuristic: HeuristicId | str, inp: HeuristicInput) -> SvmParams:
    """Run one heuristic; gamma-only rules pair their gamma with C = 1."""
    heuristic = HeuristicId.parse(heuristic) if isinstance(heuristic, str) else heuristic
    try:
        return _ESTIMATORS[heuristic](inp)
    except HeuristicError:
        raise
    except ValueError as e:
        raise HeuristicError(f"{heuristic}: {e}") from e
