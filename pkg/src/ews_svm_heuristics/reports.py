"""CSV and Markdown output for experiment reports.

One CSV per dataset and scenario with a row per method and repetition, written through the
hash gate in :mod:`ews_svm_heuristics.helpers`, plus Markdown summaries. Scores keep full float
precision in CSV so that re-reading reproduces the means exactly.
"""

from __future__ import annotations

import logging
import re
from collections.abc import Sequence
from pathlib import Path

import pandas as pd

from ews_svm_heuristics.errors import ReportError
from ews_svm_heuristics.evaluation import RunScores
from ews_svm_heuristics.helpers import atomic_write_text, publish_frame
from ews_svm_heuristics.significance import ExperimentReport, Verdict, tally_verdicts

logger = logging.getLogger(__name__)

SCORE_COLUMNS = ["dataset", "scenario", "method", "repetition", "oa", "aa"]


def _slug(text: str) -> str:
    return re.sub(r"[^\w.-]+", "_", text).strip("_") or "dataset"


def scores_frame(report: ExperimentReport) -> pd.DataFrame:
    rows = [
        {
            "dataset": report.dataset,
            "scenario": report.scenario,
            "method": method,
            "repetition": r,
            "oa": oa,
            "aa": aa,
        }
        for method, scores in report.scores.items()
        for r, (oa, aa) in enumerate(
            zip(scores.per_repetition_oa, scores.per_repetition_aa, strict=True)
        )
    ]
    return pd.DataFrame(rows, columns=SCORE_COLUMNS)


def read_scores_csv(path: str | Path) -> dict[tuple[str, str], dict[str, RunScores]]:
    """Rebuild ``{(dataset, scenario): {method: RunScores}}`` from a scores CSV."""
    path = Path(path)
    frame = pd.read_csv(
        path, float_precision="round_trip", dtype={"dataset": str, "scenario": str, "method": str}
    )
    missing = set(SCORE_COLUMNS) - set(frame.columns)
    if missing:
        raise ReportError(f"{path}: missing columns {sorted(missing)}")

    out: dict[tuple[str, str], dict[str, RunScores]] = {}
    for (dataset, scenario, method), group in frame.groupby(
        ["dataset", "scenario", "method"], sort=False
    ):
        group = group.sort_values("repetition")
        out.setdefault((dataset, scenario), {})[method] = RunScores(
            method=method,
            per_repetition_oa=tuple(group["oa"].astype(float)),
            per_repetition_aa=tuple(group["aa"].astype(float)),
        )
    return out


def _cell(value: float, verdict: Verdict | None) -> str:
    text = f"{value:.1f}"
    if verdict is Verdict.HIGHER_SIGNIFICANT:
        return f"**{text}** (+)"
    if verdict is Verdict.LOWER_SIGNIFICANT:
        return f"**{text}** (-)"
    return text


def _diff(value: float) -> str:
    return f"{value:+.1f}"


def _markdown_table(header: Sequence[str], rows: Sequence[Sequence[object]]) -> list[str]:
    lines = ["| " + " | ".join(header) + " |", "|" + "|".join("---" for _ in header) + "|"]
    lines += ["| " + " | ".join(str(c) for c in row) + " |" for row in rows]
    return lines


def render_summary(reports: Sequence[ExperimentReport]) -> str:
    """Mean OA/AA per method with differences to the reference.

    Bold marks a one-sided MWW result with p < 0.05: ``(+)`` above the reference, ``(-)`` below.
    """
    lines = ["# Summary", ""]
    for report in reports:
        lines += [f"## {report.dataset} ({report.scenario})", ""]
        header = ["Method", "OA", f"OA - {report.reference}", "AA", f"AA - {report.reference}"]
        rows = []
        for method, scores in report.scores.items():
            oa, aa = report.comparison(method, "oa"), report.comparison(method, "aa")
            rows.append(
                [
                    method,
                    _cell(scores.mean_oa, oa.verdict),
                    _diff(oa.mean_difference),
                    _cell(scores.mean_aa, aa.verdict),
                    _diff(aa.mean_difference),
                ]
            )
        lines += _markdown_table(header, rows)
        lines.append("")
    return "\n".join(lines)


def render_verdicts(reports: Sequence[ExperimentReport]) -> str:
    lines = ["# Verdicts across datasets", ""]
    for metric in ("oa", "aa"):
        tally = tally_verdicts(reports, metric)
        lines += [f"## {metric.upper()}", ""]
        lines += _markdown_table(list(tally.columns), tally.itertuples(index=False))
        lines.append("")
    return "\n".join(lines)


def publish_reports(reports: Sequence[ExperimentReport], output_dir: str | Path) -> list[Path]:
    """Write every report's scores CSV, ``summary.md`` and, for several reports,
    ``verdicts.md``. Returns the paths that were (re)written."""
    if not reports:
        raise ReportError("nothing to publish")
    output_dir = Path(output_dir)
    written = []
    for report in reports:
        name = f"{_slug(report.dataset)}_{report.scenario}"
        if publish_frame(scores_frame(report), output_dir, name):
            written.append(output_dir / f"{name}.csv")

    documents = {"summary.md": render_summary(reports)}
    if len(reports) > 1:
        documents["verdicts.md"] = render_verdicts(reports)
    for file_name, text in documents.items():
        path = output_dir / file_name
        atomic_write_text(path, text)
        logger.info("Saved %s", path)
        written.append(path)
    return written


def publish_surface(
    surface: pd.DataFrame, positions: pd.DataFrame, output_dir: str | Path, dataset: str
) -> list[Path]:
    """Hash-gated ``<dataset>_surface.csv`` (mean OA per grid point) and
    ``<dataset>_positions.csv`` (heuristic estimates to mark on it)."""
    output_dir = Path(output_dir)
    written = []
    for frame, suffix in ((surface, "surface"), (positions, "positions")):
        name = f"{_slug(dataset)}_{suffix}"
        if publish_frame(frame, output_dir, name):
            written.append(output_dir / f"{name}.csv")
    return written
