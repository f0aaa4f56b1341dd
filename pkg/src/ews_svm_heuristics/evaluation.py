"""Nested cross-validation protocol for comparing parameter selection strategies.

A strategy is a scenario plus a heuristic:

- ``heuristic``: train with ``h(T_i)`` computed on the standardized training fold.
- ``gscv_default``: grid search over ``R x R`` seeded at (1, 1), scored by internal CV.
- ``gscv_seeded``: the same grid search seeded at ``h(T_i)``.

Every repetition reshuffles both CV levels. External folds use ``base_seed + r``; internal
folds, pair samples and labelled subsets derive their seeds from it per fold.
"""

from __future__ import annotations

import logging
from collections import defaultdict
from dataclasses import dataclass, field
from enum import StrEnum

import numpy as np
import pandas as pd
from joblib import Parallel, delayed

from ews_svm_heuristics.constants import (
    GRID_MULTIPLIERS,
    K_EXTERNAL,
    K_INTERNAL,
    PAIR_BUDGET,
    REFERENCE_METHOD,
    REPETITIONS,
    SEMI_FRACTION,
    SEMI_MIN_PER_CLASS,
)
from ews_svm_heuristics.data import (
    Dataset,
    class_counts,
    fit_scaler,
    stratified_kfold,
    subsample_labeled,
    transform,
)
from ews_svm_heuristics.errors import (
    ConfigError,
    DataError,
    HeuristicError,
)
from ews_svm_heuristics.helpers import derive_seed, fingerprint_indices
from ews_svm_heuristics.heuristics import (
    DEFAULT,
    HeuristicId,
    HeuristicInput,
    SvmParams,
    estimate,
)
from ews_svm_heuristics.kernel import squared_distances
from ews_svm_heuristics.svm import SolverConfig, predict_many, train_ovo

logger = logging.getLogger(__name__)

# Purpose keys for derive_seed.
_INTERNAL = 1
_PAIRS = 2
_SUBSET = 3


class Scenario(StrEnum):
    HEURISTIC = "heuristic"
    GSCV_DEFAULT = "gscv_default"
    GSCV_SEEDED = "gscv_seeded"


@dataclass(frozen=True)
class Strategy:
    scenario: Scenario
    heuristic: HeuristicId = HeuristicId.DEFAULT

    def __post_init__(self):
        if self.scenario is Scenario.GSCV_DEFAULT and self.heuristic is not HeuristicId.DEFAULT:
            object.__setattr__(self, "heuristic", HeuristicId.DEFAULT)

    @property
    def label(self) -> str:
        if self.scenario is Scenario.GSCV_DEFAULT:
            return REFERENCE_METHOD
        if self.scenario is Scenario.GSCV_SEEDED:
            return f"{self.heuristic}+{REFERENCE_METHOD}"
        return str(self.heuristic)


def strategies_for(methods, scenarios) -> list[Strategy]:
    """Cross heuristics with scenarios; ``gscv_default`` contributes one strategy in total."""
    out: dict[str, Strategy] = {}
    for scenario in (Scenario(s) for s in scenarios):
        if scenario is Scenario.GSCV_DEFAULT:
            strategy = Strategy(scenario)
            out.setdefault(strategy.label, strategy)
            continue
        for method in methods:
            strategy = Strategy(scenario, HeuristicId.parse(method))
            out.setdefault(strategy.label, strategy)
    return list(out.values())


@dataclass(frozen=True)
class GridSpec:
    seed_params: SvmParams
    multipliers: tuple[float, ...]
    points: tuple[SvmParams, ...]

    @property
    def gammas(self) -> list[float]:
        return sorted({p.gamma for p in self.points})

    @property
    def cs(self) -> list[float]:
        return sorted({p.c for p in self.points})

    def __contains__(self, params: SvmParams) -> bool:
        return params in self.points


def build_grid(seed_params: SvmParams, multipliers=GRID_MULTIPLIERS) -> GridSpec:
    """``{r*gamma} x {r*C}`` for r in ``multipliers``, gamma-major, multipliers ascending."""
    multipliers = tuple(sorted(float(r) for r in multipliers))
    points = tuple(
        SvmParams(c=r_c * seed_params.c, gamma=r_g * seed_params.gamma)
        for r_g in multipliers
        for r_c in multipliers
    )
    return GridSpec(seed_params=seed_params, multipliers=multipliers, points=points)


@dataclass(frozen=True)
class CvConfig:
    k_external: int = K_EXTERNAL
    k_internal: int = K_INTERNAL
    repetitions: int = REPETITIONS
    base_seed: int = 0

    def __post_init__(self):
        for name, least in (("k_external", 2), ("k_internal", 2), ("repetitions", 1)):
            if getattr(self, name) < least:
                raise ConfigError(f"cv.{name} must be >= {least}, got {getattr(self, name)}")


@dataclass(frozen=True)
class SemiSupervisedConfig:
    fraction: float = SEMI_FRACTION
    min_per_class: int = SEMI_MIN_PER_CLASS
    k_internal: int | None = None  # None: use CvConfig.k_internal

    def __post_init__(self):
        if not 0 < self.fraction <= 1:
            raise ConfigError(f"semi_supervised.fraction must be in (0, 1], got {self.fraction}")
        if self.min_per_class < 1:
            raise ConfigError(
                f"semi_supervised.min_per_class must be >= 1, got {self.min_per_class}"
            )
        if self.k_internal is not None and self.k_internal < 2:
            raise ConfigError(f"semi_supervised.k_internal must be >= 2, got {self.k_internal}")


@dataclass(frozen=True)
class ChosenParams:
    """What one external fold trained with, and where it came from."""

    repetition: int
    fold: int
    params: SvmParams
    from_grid: bool
    grid_seed: SvmParams | None = None
    heuristic_fallback: bool = False
    k_internal: int | None = None
    scaler_fingerprint: str = ""
    test_fingerprint: str = ""
    n_labeled: int = 0


@dataclass(frozen=True)
class RunScores:
    method: str
    per_repetition_oa: tuple[float, ...]
    per_repetition_aa: tuple[float, ...]
    chosen_params_log: tuple[ChosenParams, ...] = field(default=(), compare=False)

    def __post_init__(self):
        if len(self.per_repetition_oa) != len(self.per_repetition_aa):
            raise ValueError(
                f"{self.method}: {len(self.per_repetition_oa)} OA vs "
                f"{len(self.per_repetition_aa)} AA repetitions"
            )
        if not self.per_repetition_oa:
            raise ValueError(f"{self.method}: no repetitions")
        values = np.concatenate([self.per_repetition_oa, self.per_repetition_aa])
        if np.any(values < 0) or np.any(values > 100):
            raise ValueError(f"{self.method}: scores must lie in [0, 100]")

    @property
    def repetitions(self) -> int:
        return len(self.per_repetition_oa)

    @property
    def mean_oa(self) -> float:
        return float(np.mean(self.per_repetition_oa))

    @property
    def mean_aa(self) -> float:
        return float(np.mean(self.per_repetition_aa))


# --------------------------------------------------------------------------------------------
# Metrics


def _paired(predicted, truth) -> tuple[np.ndarray, np.ndarray]:
    p, t = np.asarray(predicted), np.asarray(truth)
    if p.shape != t.shape:
        raise ValueError(f"length mismatch: {p.size} predictions vs {t.size} labels")
    if t.size == 0:
        raise ValueError("cannot score an empty prediction")
    return p, t


def overall_accuracy(predicted, truth) -> float:
    p, t = _paired(predicted, truth)
    return 100.0 * float(np.count_nonzero(p == t)) / t.size


def average_accuracy(predicted, truth, n_classes: int | None = None) -> float:
    """Mean per-class recall over the classes present in ``truth``."""
    p, t = _paired(predicted, truth)
    present = np.unique(t)
    if n_classes is not None:
        present = present[present < n_classes]
    recalls = [np.count_nonzero(p[t == c] == c) / np.count_nonzero(t == c) for c in present]
    return 100.0 * float(np.mean(recalls))


# --------------------------------------------------------------------------------------------
# Grid search


def grid_scores(
    features: np.ndarray,
    labels: np.ndarray,
    points,
    k: int,
    seed: int,
    config: SolverConfig | None = None,
    n_classes: int | None = None,
) -> np.ndarray:
    """Mean k-fold OA for every point; the scaler is refit on each fold's training part.

    A column that is constant within one training part is centred but not scaled there.

    One Gram matrix per (fold, gamma) is shared by all C values at that gamma.
    """
    x = np.asarray(features, dtype=np.float64)
    y = np.asarray(labels, dtype=np.int64)
    points = list(points)
    n_classes = n_classes or int(y.max()) + 1
    by_gamma: dict[float, list[int]] = defaultdict(list)
    for idx, point in enumerate(points):
        by_gamma[point.gamma].append(idx)

    totals = np.zeros(len(points))
    plan = stratified_kfold(y, k, seed)
    for train, test in plan.splits():
        scaler = fit_scaler(x[train], keep_constant=True)
        x_tr, x_te = transform(scaler, x[train]), transform(scaler, x[test])
        d2 = squared_distances(x_tr, x_tr)
        for gamma, members in by_gamma.items():
            gram = np.exp(-gamma * d2)
            for idx in members:
                model = train_ovo(
                    x_tr, y[train], points[idx], config, n_classes=n_classes, gram=gram
                )
                totals[idx] += overall_accuracy(predict_many(model, x_te), y[test])
    return totals / k


def inner_cv_select(
    features: np.ndarray,
    labels: np.ndarray,
    grid: GridSpec,
    k_internal: int,
    seed: int,
    config: SolverConfig | None = None,
    n_classes: int | None = None,
) -> SvmParams:
    """Grid point with the best mean internal OA; ties go to lower C, then lower gamma."""
    scores = grid_scores(features, labels, grid.points, k_internal, seed, config, n_classes)
    best = scores.max()
    tied = [p for p, s in zip(grid.points, scores, strict=True) if s == best]
    return min(tied, key=lambda p: (p.c, p.gamma))


# --------------------------------------------------------------------------------------------
# External CV


def _heuristic_params(
    heuristic: HeuristicId,
    x_full: np.ndarray,
    x_labeled: np.ndarray,
    y_labeled: np.ndarray,
    n_classes: int,
    seed: int,
    pair_budget: int,
    where: str,
) -> tuple[SvmParams, bool]:
    if heuristic is HeuristicId.DEFAULT:
        return DEFAULT, False
    try:
        if heuristic.supervised:
            inp = HeuristicInput.from_features(x_labeled, y_labeled, n_classes, pair_budget, seed)
        else:
            inp = HeuristicInput.from_features(x_full, None, n_classes, pair_budget, seed)
        return estimate(heuristic, inp), False
    except HeuristicError as e:
        logger.warning("%s: %s failed (%s); falling back to C=1 gamma=1", where, heuristic, e)
        return DEFAULT, True


def _feasible_k(labels: np.ndarray, requested: int, where: str) -> int | None:
    smallest = int(class_counts(labels)[np.unique(labels)].min())
    if smallest >= requested:
        return requested
    if smallest >= 2:
        logger.warning(
            "%s: smallest labelled class has %d members; internal CV reduced to %d folds",
            where,
            smallest,
            smallest,
        )
        return smallest
    logger.warning("%s: labelled subset too small for internal CV; using seed params", where)
    return None


def _run_fold(
    dataset: Dataset,
    strategy: Strategy,
    cv: CvConfig,
    config: SolverConfig,
    semi: SemiSupervisedConfig | None,
    repetition: int,
    fold: int,
    train: np.ndarray,
    test: np.ndarray,
    pair_budget: int,
) -> tuple[float, float, ChosenParams]:
    where = f"{dataset.name or 'dataset'} rep {repetition} fold {fold}"
    rep_seed = cv.base_seed + repetition
    x, y, n_classes = dataset.features, dataset.labels, dataset.n_classes

    try:
        scaler = fit_scaler(x[train])
    except DataError as e:
        raise DataError(f"{where}: {e}") from e
    x_train, x_test = transform(scaler, x[train]), transform(scaler, x[test])
    y_train = y[train]

    if semi is None:
        labeled = np.arange(train.size)
    else:
        seed = derive_seed(rep_seed, fold, _SUBSET)
        subset = subsample_labeled(y_train, semi.fraction, semi.min_per_class, seed)
        labeled = subset.labeled_indices
    x_lab, y_lab = x_train[labeled], y_train[labeled]

    h_params, fallback = _heuristic_params(
        strategy.heuristic,
        x_train,
        x_lab,
        y_lab,
        n_classes,
        derive_seed(rep_seed, fold, _PAIRS),
        pair_budget,
        where,
    )

    grid_seed = None
    k_used = None
    if strategy.scenario is Scenario.HEURISTIC:
        params = h_params
    else:
        grid_seed = DEFAULT if strategy.scenario is Scenario.GSCV_DEFAULT else h_params
        grid = build_grid(grid_seed)
        if semi is None:
            k_used = cv.k_internal
        else:
            k_used = _feasible_k(y_lab, semi.k_internal or cv.k_internal, where)
        if k_used is None:
            params = grid_seed
        else:
            try:
                params = inner_cv_select(
                    x_lab,
                    y_lab,
                    grid,
                    k_used,
                    derive_seed(rep_seed, fold, _INTERNAL),
                    config,
                    n_classes,
                )
            except DataError as e:
                raise type(e)(f"{where}: internal CV: {e}") from e

    model = train_ovo(x_lab, y_lab, params, config, n_classes=n_classes)
    predicted = predict_many(model, x_test)
    record = ChosenParams(
        repetition=repetition,
        fold=fold,
        params=params,
        from_grid=grid_seed is not None,
        grid_seed=grid_seed,
        heuristic_fallback=fallback,
        k_internal=k_used,
        scaler_fingerprint=fingerprint_indices(train),
        test_fingerprint=fingerprint_indices(test),
        n_labeled=int(labeled.size),
    )
    return (
        overall_accuracy(predicted, y[test]),
        average_accuracy(predicted, y[test], n_classes),
        record,
    )


def _run_repetition(dataset, strategy, cv, config, semi, repetition, pair_budget):
    plan = stratified_kfold(dataset.labels, cv.k_external, cv.base_seed + repetition)
    folds = [
        _run_fold(dataset, strategy, cv, config, semi, repetition, f, train, test, pair_budget)
        for f, (train, test) in enumerate(plan.splits())
    ]
    oa = float(np.mean([f[0] for f in folds]))
    aa = float(np.mean([f[1] for f in folds]))
    return oa, aa, [f[2] for f in folds]


def _run(dataset, strategy, cv, config, semi, n_jobs, pair_budget) -> RunScores:
    config = config or SolverConfig()
    mode = "semi-supervised" if semi else "supervised"
    logger.info("%s: %s (%s, %d repetitions)", dataset.name, strategy.label, mode, cv.repetitions)
    results = Parallel(n_jobs=n_jobs)(
        delayed(_run_repetition)(dataset, strategy, cv, config, semi, r, pair_budget)
        for r in range(cv.repetitions)
    )
    return RunScores(
        method=strategy.label,
        per_repetition_oa=tuple(r[0] for r in results),
        per_repetition_aa=tuple(r[1] for r in results),
        chosen_params_log=tuple(c for r in results for c in r[2]),
    )


def run_external_cv(
    dataset: Dataset,
    strategy: Strategy,
    cv: CvConfig | None = None,
    config: SolverConfig | None = None,
    *,
    n_jobs: int = 1,
    pair_budget: int = PAIR_BUDGET,
) -> RunScores:
    """Repeated stratified k-fold estimate of OA/AA for one selection strategy.

    Repetition score = mean over external folds. A degenerate fold raises with the repetition
    and fold in the message; a failing heuristic falls back to (1, 1) with a warning.
    """
    return _run(dataset, strategy, cv or CvConfig(), config, None, n_jobs, pair_budget)


def run_semi_supervised(
    dataset: Dataset,
    strategy: Strategy,
    cv: CvConfig | None = None,
    subsample: SemiSupervisedConfig | None = None,
    config: SolverConfig | None = None,
    *,
    n_jobs: int = 1,
    pair_budget: int = PAIR_BUDGET,
) -> RunScores:
    """As :func:`run_external_cv`, but the classifier, its grid search and Jaakkola only see a
    labelled subset of each training fold. The scaler and unsupervised heuristics use the
    whole training fold."""
    subsample = subsample or SemiSupervisedConfig()
    return _run(dataset, strategy, cv or CvConfig(), config, subsample, n_jobs, pair_budget)


def run_strategies(
    dataset: Dataset,
    strategies,
    cv: CvConfig | None = None,
    config: SolverConfig | None = None,
    semi: SemiSupervisedConfig | None = None,
    *,
    n_jobs: int = 1,
    pair_budget: int = PAIR_BUDGET,
) -> dict[str, RunScores]:
    cv = cv or CvConfig()
    out = {}
    for strategy in strategies:
        if semi is None:
            scores = run_external_cv(
                dataset, strategy, cv, config, n_jobs=n_jobs, pair_budget=pair_budget
            )
        else:
            scores = run_semi_supervised(
                dataset, strategy, cv, semi, config, n_jobs=n_jobs, pair_budget=pair_budget
            )
        out[strategy.label] = scores
        logger.info(
            "%s %s: OA %.1f AA %.1f", dataset.name, strategy.label, scores.mean_oa, scores.mean_aa
        )
    return out


# --------------------------------------------------------------------------------------------
# Parameter impact


def accuracy_surface(
    dataset: Dataset,
    gammas,
    cs,
    k: int = K_EXTERNAL,
    seed: int = 0,
    config: SolverConfig | None = None,
) -> pd.DataFrame:
    """Mean k-fold OA over the ``gammas x cs`` grid, one row per point."""
    points = [SvmParams(c=float(c), gamma=float(g)) for g in gammas for c in cs]
    scores = grid_scores(
        dataset.features, dataset.labels, points, k, seed, config, dataset.n_classes
    )
    return pd.DataFrame(
        {
            "gamma": [p.gamma for p in points],
            "c": [p.c for p in points],
            "mean_oa": scores,
        }
    )


def heuristic_positions(
    dataset: Dataset, heuristics, pair_budget: int = PAIR_BUDGET, seed: int = 0
) -> pd.DataFrame:
    """Estimates on the fully standardized dataset, to place on an accuracy surface."""
    x = transform(fit_scaler(dataset.features), dataset.features)
    inp = HeuristicInput.from_features(x, dataset.labels, dataset.n_classes, pair_budget, seed)
    rows = []
    for h in heuristics:
        params = estimate(h, inp)
        rows.append({"method": str(h), "c": params.c, "gamma": params.gamma})
    return pd.DataFrame(rows, columns=["method", "c", "gamma"])
