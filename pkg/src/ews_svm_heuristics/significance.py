"""One-sided Mann-Whitney-Wilcoxon tests between selection strategies."""

from __future__ import annotations

from collections.abc import Mapping, Sequence
from dataclasses import dataclass
from enum import StrEnum

import numpy as np
import pandas as pd
from scipy import special, stats

from ews_svm_heuristics.constants import MWW_EXACT_MAX, REFERENCE_METHOD, SIGNIFICANCE_LEVEL
from ews_svm_heuristics.errors import ReportError
from ews_svm_heuristics.evaluation import RunScores

METRICS = ("oa", "aa")
_TALLY_COLUMNS = ("datasets", "higher", "higher_significant", "lower_significant", "best")


class Direction(StrEnum):
    GREATER = "greater"
    LESS = "less"


class Verdict(StrEnum):
    HIGHER_SIGNIFICANT = "higher, significant"
    NOT_SIGNIFICANT = "not significant"
    LOWER_SIGNIFICANT = "lower, significant"


@dataclass(frozen=True)
class MwwResult:
    u_statistic: float
    p_value: float
    direction: Direction
    significant: bool
    exact: bool


def _exact_sf(doubled_ranks: np.ndarray, n_a: int, observed: int, direction: Direction) -> float:
    """Tail probability of the (doubled) rank sum of ``n_a`` elements over every way of
    choosing which pooled values belong to A."""
    total = int(doubled_ranks.sum())
    # counts[k, s]: subsets of size k whose doubled rank sum is s
    counts = np.zeros((n_a + 1, total + 1), dtype=np.int64)
    counts[0, 0] = 1
    for r in doubled_ranks:
        counts[1:, r:] += counts[:-1, : total + 1 - r].copy()
    dist = counts[n_a]
    if direction is Direction.GREATER:
        hits = dist[observed:].sum()
    else:
        hits = dist[: observed + 1].sum()
    return float(hits / special.comb(doubled_ranks.size, n_a, exact=True))


def mww_one_sided(
    sample_a, sample_b, direction: Direction | str, *, exact: bool | None = None
) -> MwwResult:
    """Test whether A is stochastically greater (or less) than B.

    ``U`` counts pairs with ``a > b`` plus half the ties. Exact when both samples have at most
    12 values; otherwise a normal approximation with tie-corrected variance and a 0.5
    continuity correction. ``exact`` forces either path.
    """
    direction = Direction(direction)
    a = np.asarray(sample_a, dtype=np.float64).ravel()
    b = np.asarray(sample_b, dtype=np.float64).ravel()
    if a.size == 0 or b.size == 0:
        raise ValueError("both samples must be non-empty")
    n_a, n_b = a.size, b.size
    ranks = stats.rankdata(np.concatenate([a, b]))  # midranks
    u = float(ranks[:n_a].sum() - n_a * (n_a + 1) / 2)

    if exact is None:
        exact = n_a <= MWW_EXACT_MAX and n_b <= MWW_EXACT_MAX
    if exact:
        doubled = np.rint(2 * ranks).astype(np.int64)
        p = _exact_sf(doubled, n_a, int(doubled[:n_a].sum()), direction)
    else:
        n = n_a + n_b
        _, ties = np.unique(ranks, return_counts=True)
        tie_term = float((ties**3 - ties).sum()) / (n * (n - 1))
        var = n_a * n_b / 12.0 * ((n + 1) - tie_term)
        if var <= 0:
            p = 1.0
        else:
            shift = u - n_a * n_b / 2.0
            sd = np.sqrt(var)
            if direction is Direction.GREATER:
                p = float(stats.norm.sf((shift - 0.5) / sd))
            else:
                p = float(stats.norm.cdf((shift + 0.5) / sd))
    p = min(max(p, 0.0), 1.0)
    return MwwResult(
        u_statistic=u,
        p_value=p,
        direction=direction,
        significant=p < SIGNIFICANCE_LEVEL,
        exact=exact,
    )


@dataclass(frozen=True)
class Comparison:
    method: str
    metric: str
    mean_difference: float  # method - reference
    greater: MwwResult
    less: MwwResult

    @property
    def verdict(self) -> Verdict:
        if self.greater.significant:
            return Verdict.HIGHER_SIGNIFICANT
        if self.less.significant:
            return Verdict.LOWER_SIGNIFICANT
        return Verdict.NOT_SIGNIFICANT


@dataclass(frozen=True)
class ExperimentReport:
    dataset: str
    scenario: str  # "supervised" or "semi_supervised"
    scores: Mapping[str, RunScores]
    reference: str
    comparisons: Mapping[tuple[str, str], Comparison]

    def comparison(self, method: str, metric: str = "oa") -> Comparison:
        return self.comparisons[(method, metric)]

    @property
    def methods(self) -> list[str]:
        return list(self.scores)


def _values(scores: RunScores, metric: str) -> tuple[float, ...]:
    return scores.per_repetition_oa if metric == "oa" else scores.per_repetition_aa


def compare_methods(
    reports: Mapping[str, RunScores],
    reference: str = REFERENCE_METHOD,
    *,
    dataset: str = "",
    scenario: str = "supervised",
) -> ExperimentReport:
    """Test every method (the reference included) against the reference, on OA and AA."""
    if reference not in reports:
        raise ReportError(f"reference method {reference!r} missing; have {list(reports)}")
    counts = {name: s.repetitions for name, s in reports.items()}
    if len(set(counts.values())) != 1:
        raise ReportError(f"mismatched repetition counts: {counts}")

    ref = reports[reference]
    comparisons = {}
    for name, scores in reports.items():
        for metric in METRICS:
            mine, theirs = _values(scores, metric), _values(ref, metric)
            comparisons[(name, metric)] = Comparison(
                method=name,
                metric=metric,
                mean_difference=float(np.mean(mine) - np.mean(theirs)),
                greater=mww_one_sided(mine, theirs, Direction.GREATER),
                less=mww_one_sided(mine, theirs, Direction.LESS),
            )
    return ExperimentReport(
        dataset=dataset,
        scenario=scenario,
        scores=dict(reports),
        reference=reference,
        comparisons=comparisons,
    )


def tally_verdicts(reports: Sequence[ExperimentReport], metric: str = "oa") -> pd.DataFrame:
    """Across datasets, per method: how often it beat the reference, significantly or not,
    lost significantly, and had the best mean."""
    rows: dict[str, dict[str, int]] = {}
    for report in reports:
        means = {m: float(np.mean(_values(s, metric))) for m, s in report.scores.items()}
        best = max(means.values())
        for method in report.methods:
            row = rows.setdefault(method, dict.fromkeys(_TALLY_COLUMNS, 0))
            cmp = report.comparison(method, metric)
            row["datasets"] += 1
            row["higher"] += int(cmp.mean_difference > 0)
            row["higher_significant"] += int(cmp.verdict is Verdict.HIGHER_SIGNIFICANT)
            row["lower_significant"] += int(cmp.verdict is Verdict.LOWER_SIGNIFICANT)
            row["best"] += int(means[method] == best)
    frame = pd.DataFrame.from_dict(rows, orient="index")
    frame.index.name = "method"
    return frame.reset_index()


def best_of(scores: Mapping[str, RunScores], members: Sequence[str], label: str) -> RunScores:
    """The member with the highest mean OA, renamed ``label`` (e.g. the best Smola quantile)."""
    present = [m for m in members if m in scores]
    if not present:
        raise ReportError(f"none of {list(members)} were run")
    winner = max(present, key=lambda m: scores[m].mean_oa)
    chosen = scores[winner]
    return RunScores(
        method=label,
        per_repetition_oa=chosen.per_repetition_oa,
        per_repetition_aa=chosen.per_repetition_aa,
        chosen_params_log=chosen.chosen_params_log,
    )
