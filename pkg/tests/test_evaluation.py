from __future__ import annotations

import logging
import math

import numpy as np
import pytest

from ews_svm_heuristics.constants import GRID_MULTIPLIERS
from ews_svm_heuristics.data import Dataset, stratified_kfold, zero_rule_accuracy
from ews_svm_heuristics.errors import ConfigError, DataError
from ews_svm_heuristics.evaluation import (
    CvConfig,
    GridSpec,
    RunScores,
    Scenario,
    SemiSupervisedConfig,
    Strategy,
    _feasible_k,
    accuracy_surface,
    average_accuracy,
    build_grid,
    grid_scores,
    heuristic_positions,
    inner_cv_select,
    overall_accuracy,
    run_external_cv,
    run_semi_supervised,
    run_strategies,
    strategies_for,
)
from ews_svm_heuristics.helpers import fingerprint_indices
from ews_svm_heuristics.heuristics import DEFAULT, HeuristicId, SvmParams

COVTRACE = Strategy(Scenario.HEURISTIC, HeuristicId.COVTRACE)
GSCV = Strategy(Scenario.GSCV_DEFAULT)


def _dataset(x, y, name="blobs") -> Dataset:
    return Dataset(x, y, tuple(f"c{i}" for i in range(int(y.max()) + 1)), name)


@pytest.fixture
def blob_data(make_blobs) -> Dataset:
    return _dataset(*make_blobs(sizes=(12, 12, 12)))


def _expected_labeled(train_labels, fraction, minimum) -> int:
    sizes = np.bincount(train_labels)
    return sum(min(s, max(math.ceil(fraction * s), min(minimum, s))) for s in sizes if s)


# --------------------------------------------------------------------------------------------
# strategies and grid


def test_strategy_labels():
    labels = [s.label for s in strategies_for(["default", "covtrace"], list(Scenario))]
    assert labels == ["default", "covtrace", "GSCV", "default+GSCV", "covtrace+GSCV"]


def test_gscv_default_ignores_the_heuristic():
    assert Strategy(Scenario.GSCV_DEFAULT, HeuristicId.CHAPELLE).heuristic is HeuristicId.DEFAULT


def test_build_grid_is_gamma_major_around_the_seed():
    grid = build_grid(SvmParams(c=2.0, gamma=0.5))
    assert len(grid.points) == 121
    assert SvmParams(c=2.0, gamma=0.5) in grid
    assert (grid.points[0].c, grid.points[0].gamma) == pytest.approx((2e-5, 5e-6))
    assert len({p.gamma for p in grid.points[:11]}) == 1
    assert grid.gammas == pytest.approx([0.5 * r for r in GRID_MULTIPLIERS])
    assert grid.cs == pytest.approx([2.0 * r for r in GRID_MULTIPLIERS])


def test_build_grid_single_multiplier():
    grid = build_grid(DEFAULT, multipliers=(1,))
    assert grid.points == (DEFAULT,)


# --------------------------------------------------------------------------------------------
# metrics


def test_overall_and_average_accuracy():
    assert overall_accuracy([0, 1, 1, 2], [0, 1, 2, 2]) == 75.0
    assert average_accuracy([0, 1, 1, 2], [0, 1, 2, 2]) == pytest.approx(250 / 3)
    # majority guess on an imbalanced fold
    assert overall_accuracy([0, 0, 0, 0], [0, 0, 0, 1]) == 75.0
    assert average_accuracy([0, 0, 0, 0], [0, 0, 0, 1]) == 50.0


def test_average_accuracy_skips_classes_absent_from_the_fold():
    assert average_accuracy([0, 2, 2], [0, 2, 0], n_classes=3) == pytest.approx(75.0)


@pytest.mark.parametrize(("pred", "truth"), [([0, 1], [0]), ([], [])])
def test_metrics_reject_bad_input(pred, truth):
    with pytest.raises(ValueError):
        overall_accuracy(pred, truth)
    with pytest.raises(ValueError):
        average_accuracy(pred, truth)


def test_run_scores_validation():
    with pytest.raises(ValueError, match="repetitions"):
        RunScores("m", (90.0,), (80.0, 81.0))
    with pytest.raises(ValueError, match=r"\[0, 100\]"):
        RunScores("m", (101.0,), (80.0,))
    scores = RunScores("m", (90.0, 92.0), (80.0, 84.0))
    assert (scores.repetitions, scores.mean_oa, scores.mean_aa) == (2, 91.0, 82.0)


@pytest.mark.parametrize(
    ("field", "value"), [("k_external", 1), ("k_internal", 1), ("repetitions", 0)]
)
def test_cv_config_validation(field, value):
    with pytest.raises(ConfigError, match=field):
        CvConfig(**{field: value})


@pytest.mark.parametrize(
    "kwargs", [{"fraction": 0.0}, {"fraction": 1.5}, {"min_per_class": 0}, {"k_internal": 1}]
)
def test_semi_supervised_config_validation(kwargs):
    with pytest.raises(ConfigError):
        SemiSupervisedConfig(**kwargs)


# --------------------------------------------------------------------------------------------
# internal selection


def test_inner_cv_select_single_point(make_blobs):
    x, y = make_blobs()
    grid = build_grid(SvmParams(3.0, 0.2), multipliers=(1,))
    assert inner_cv_select(x, y, grid, 3, seed=0) == SvmParams(3.0, 0.2)


def test_inner_cv_select_breaks_ties_towards_small_c_then_small_gamma(make_blobs):
    x, y = make_blobs()
    points = (SvmParams(10.0, 0.5), SvmParams(1.0, 0.5), SvmParams(1.0, 0.1))
    grid = GridSpec(seed_params=DEFAULT, multipliers=(1.0,), points=points)
    assert inner_cv_select(x, y, grid, 3, seed=0) == SvmParams(1.0, 0.1)


def test_grid_search_tolerates_columns_constant_in_one_internal_fold(make_blobs):
    x, y = make_blobs(sizes=(15, 15))
    spike = np.zeros((30, 1))
    spike[4] = 1.0
    x = np.hstack([x, spike])
    points = [SvmParams(1.0, 0.5), SvmParams(10.0, 0.5)]
    scores = grid_scores(x, y, points, 3, seed=0)
    assert scores.shape == (2,)
    assert ((scores >= 0) & (scores <= 100)).all()


def test_feasible_k():
    assert _feasible_k(np.array([0, 0, 0, 1, 1, 1]), 3, "here") == 3
    assert _feasible_k(np.array([0, 0, 0, 1, 1]), 3, "here") == 2
    assert _feasible_k(np.array([0, 0, 0, 1]), 3, "here") is None


# --------------------------------------------------------------------------------------------
# external protocol


def test_default_heuristic_trains_with_unit_params(iris):
    scores = run_external_cv(iris, Strategy(Scenario.HEURISTIC), CvConfig(repetitions=2))
    assert scores.method == "default"
    assert scores.repetitions == 2
    assert len(scores.chosen_params_log) == 10
    assert all(c.params == DEFAULT and not c.from_grid for c in scores.chosen_params_log)


def test_external_folds_follow_the_repetition_seed(iris):
    cv = CvConfig(repetitions=2, base_seed=7)
    scores = run_external_cv(iris, COVTRACE, cv)
    for record in scores.chosen_params_log:
        plan = stratified_kfold(iris.labels, 5, 7 + record.repetition)
        train, test = plan.split(record.fold)
        assert np.intersect1d(train, test).size == 0
        assert record.scaler_fingerprint == fingerprint_indices(train)
        assert record.test_fingerprint == fingerprint_indices(test)
        assert record.n_labeled == train.size


def test_covtrace_estimates_on_standardized_folds(iris):
    scores = run_external_cv(iris, COVTRACE, CvConfig(repetitions=1))
    for record in scores.chosen_params_log:
        assert record.params.c == 1.0
        assert record.params.gamma == pytest.approx(1 / (2 * iris.n_features), rel=1e-9)


def test_external_cv_is_reproducible_and_parallel_safe(iris):
    cv = CvConfig(repetitions=3, base_seed=4)
    serial = run_external_cv(iris, COVTRACE, cv)
    assert run_external_cv(iris, COVTRACE, cv) == serial
    assert run_external_cv(iris, COVTRACE, cv, n_jobs=2) == serial
    other = run_external_cv(iris, COVTRACE, CvConfig(repetitions=3, base_seed=5))
    assert [c.test_fingerprint for c in other.chosen_params_log] != [
        c.test_fingerprint for c in serial.chosen_params_log
    ]


def test_gscv_seeded_at_default_is_gscv(blob_data):
    cv = CvConfig(k_external=3, k_internal=2, repetitions=1)
    reference = run_external_cv(blob_data, GSCV, cv)
    seeded = run_external_cv(blob_data, Strategy(Scenario.GSCV_SEEDED, HeuristicId.DEFAULT), cv)
    assert seeded.per_repetition_oa == reference.per_repetition_oa
    assert seeded.per_repetition_aa == reference.per_repetition_aa
    assert [c.params for c in seeded.chosen_params_log] == [
        c.params for c in reference.chosen_params_log
    ]
    grid = build_grid(DEFAULT)
    for record in reference.chosen_params_log:
        assert record.from_grid and record.grid_seed == DEFAULT and record.k_internal == 2
        assert record.params in grid


def test_zero_variance_training_column_names_the_fold(rng):
    x = np.column_stack([rng.normal(size=30), np.zeros(30)])
    x[4, 1] = 1.0
    data = _dataset(x, np.repeat([0, 1], 15), name="spiky")
    with pytest.raises(DataError, match=r"spiky rep 0 fold \d: .*zero variance"):
        run_external_cv(data, Strategy(Scenario.HEURISTIC), CvConfig(repetitions=1))


def test_failing_heuristic_falls_back_to_default(rng, caplog):
    # every point has a twin of the other class, so nearest other-class distances are mostly 0
    points = rng.normal(size=(20, 2))
    data = _dataset(np.repeat(points, 2, axis=0), np.tile([0, 1], 20), name="twins")
    strategy = Strategy(Scenario.HEURISTIC, HeuristicId.JAAKKOLA)
    with caplog.at_level(logging.WARNING, logger="ews_svm_heuristics"):
        scores = run_external_cv(data, strategy, CvConfig(repetitions=1))
    assert all(c.heuristic_fallback and c.params == DEFAULT for c in scores.chosen_params_log)
    assert "falling back" in caplog.text


def test_run_strategies_keys_by_label(iris):
    strategies = [Strategy(Scenario.HEURISTIC), COVTRACE]
    scores = run_strategies(iris, strategies, CvConfig(repetitions=1))
    assert list(scores) == ["default", "covtrace"]
    assert scores["covtrace"] == run_external_cv(iris, COVTRACE, CvConfig(repetitions=1))


# --------------------------------------------------------------------------------------------
# semi-supervised protocol


@pytest.mark.parametrize("heuristic", [HeuristicId.COVTRACE, HeuristicId.JAAKKOLA])
def test_full_fraction_reproduces_supervised_run(iris, heuristic):
    cv = CvConfig(repetitions=2, base_seed=3)
    strategy = Strategy(Scenario.HEURISTIC, heuristic)
    semi = run_semi_supervised(iris, strategy, cv, SemiSupervisedConfig(fraction=1.0))
    assert semi == run_external_cv(iris, strategy, cv)


def test_labelled_subsets_keep_the_class_minimum(make_blobs):
    data = _dataset(*make_blobs(sizes=(40, 10)))
    cv = CvConfig(repetitions=2)
    scores = run_semi_supervised(data, COVTRACE, cv, SemiSupervisedConfig(0.1, 5))
    for record in scores.chosen_params_log:
        train, _ = stratified_kfold(data.labels, 5, record.repetition).split(record.fold)
        assert record.n_labeled == _expected_labeled(data.labels[train], 0.1, 5) == 10


def test_wdbc_labelled_subsets(wdbc):
    scores = run_semi_supervised(wdbc, COVTRACE, CvConfig(repetitions=1))
    for record in scores.chosen_params_log:
        train, _ = stratified_kfold(wdbc.labels, 5, record.repetition).split(record.fold)
        assert record.n_labeled == _expected_labeled(wdbc.labels[train], 0.1, 5)
        assert record.n_labeled < train.size // 5


def test_semi_supervised_grid_search_shrinks_internal_folds(make_blobs, caplog):
    data = _dataset(*make_blobs(sizes=(12, 12)))
    cv = CvConfig(k_external=3, k_internal=3, repetitions=1)
    with caplog.at_level(logging.WARNING, logger="ews_svm_heuristics"):
        scores = run_semi_supervised(data, GSCV, cv, SemiSupervisedConfig(0.1, 2))
    assert {c.k_internal for c in scores.chosen_params_log} == {2}
    assert {c.n_labeled for c in scores.chosen_params_log} == {4}
    assert "reduced to 2 folds" in caplog.text


# --------------------------------------------------------------------------------------------
# parameter impact


def test_accuracy_surface(blob_data):
    surface = accuracy_surface(blob_data, gammas=[0.1, 1.0], cs=[1.0, 10.0], k=3)
    assert list(surface.columns) == ["gamma", "c", "mean_oa"]
    assert surface[["gamma", "c"]].to_numpy().tolist() == [
        [0.1, 1.0],
        [0.1, 10.0],
        [1.0, 1.0],
        [1.0, 10.0],
    ]
    assert surface["mean_oa"].between(0, 100).all()


def test_heuristic_positions(iris):
    frame = heuristic_positions(iris, [HeuristicId.DEFAULT, HeuristicId.WANG])
    assert frame["method"].tolist() == ["default", "Wang"]
    assert frame.loc[1, "gamma"] == 1 / 8


# --------------------------------------------------------------------------------------------
# reference datasets


PROTOCOL_METHODS = ["default", "covtrace", "Chapelle"]
HEURISTIC_POOL = ["covtrace", "covtrace+C", "covtrace+MC", "Gelbart", "Smola_50", "Chapelle"]


@pytest.mark.slow
def test_iris_full_protocol_shape_and_reproducibility(iris):
    cv = CvConfig(k_external=5, k_internal=3, repetitions=10)
    strategies = strategies_for(PROTOCOL_METHODS, ["heuristic", "gscv_default"])
    scores = run_strategies(iris, strategies, cv)
    assert list(scores) == ["default", "covtrace", "Chapelle", "GSCV"]
    assert all(s.repetitions == 10 for s in scores.values())
    records = scores["GSCV"].chosen_params_log
    assert len(records) == 50
    for record in records:
        grid = build_grid(record.grid_seed)
        assert len(grid.points) == 121
        assert record.params in grid
    assert run_strategies(iris, strategies, cv, n_jobs=-1) == scores


@pytest.mark.slow
@pytest.mark.parametrize("name", ["iris", "wine", "wdbc"])
def test_tuned_parameters_beat_zero_rule(request, name):
    data = request.getfixturevalue(name)
    cv = CvConfig(repetitions=2)
    strategies = strategies_for(HEURISTIC_POOL, ["heuristic", "gscv_default"])
    scores = run_strategies(data, strategies, cv, n_jobs=-1)
    best = max(HEURISTIC_POOL, key=lambda m: scores[m].mean_oa)
    floor = zero_rule_accuracy(data) + 20
    assert scores["GSCV"].mean_oa >= floor
    assert scores[best].mean_oa >= floor


@pytest.mark.slow
@pytest.mark.parametrize("name", ["wine", "wdbc"])
def test_tuned_parameters_beat_the_fixed_default(request, name):
    data = request.getfixturevalue(name)
    cv = CvConfig(repetitions=2)
    strategies = strategies_for(["default", *HEURISTIC_POOL], ["heuristic", "gscv_default"])
    scores = run_strategies(data, strategies, cv, n_jobs=-1)
    best = max(HEURISTIC_POOL, key=lambda m: scores[m].mean_oa)
    assert scores["GSCV"].mean_oa > scores["default"].mean_oa
    assert scores[best].mean_oa > scores["default"].mean_oa
