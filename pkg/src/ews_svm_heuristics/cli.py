"""Command-line front end.

    ews-svm-heuristics run configs/example.toml --jobs 4
    ews-svm-heuristics estimate data/iris.dat --format keel --heuristic covtrace
    ews-svm-heuristics zero-rule data/iris.dat
    ews-svm-heuristics describe data/iris.dat
    ews-svm-heuristics surface data/iris.dat --exponents -3 3 --heuristics covtrace,Smola_50
    ews-svm-heuristics report results
    ews-svm-heuristics versions

Failures print one line ``error[<CODE>]: <message>`` to stderr and exit with status 2.
"""

from __future__ import annotations

import argparse
import logging
import os
import sys
from pathlib import Path

from ews_svm_heuristics import log
from ews_svm_heuristics._version import __version__, show_version
from ews_svm_heuristics.config import ExperimentConfig, load_config
from ews_svm_heuristics.constants import (
    ENV_JOBS,
    ENV_OUTPUT_DIR,
    K_EXTERNAL,
    OUTPUT_DIR,
    PAIR_BUDGET,
    REFERENCE_METHOD,
)
from ews_svm_heuristics.data import (
    describe,
    fit_scaler,
    load_dataset,
    transform,
    zero_rule_accuracy,
)
from ews_svm_heuristics.errors import ConfigError, ReportError, SvmHeuristicsError
from ews_svm_heuristics.evaluation import (
    accuracy_surface,
    heuristic_positions,
    run_strategies,
    strategies_for,
)
from ews_svm_heuristics.heuristics import SMOLA_QUANTILES, HeuristicId, HeuristicInput, estimate
from ews_svm_heuristics.reports import publish_reports, publish_surface, read_scores_csv
from ews_svm_heuristics.significance import ExperimentReport, best_of, compare_methods

logger = logging.getLogger(__name__)

EXIT_FAILURE = 2
SMOLA_LABEL = "Smola"


def _jobs(cli_value: int | None) -> int:
    if cli_value is not None:
        return cli_value
    env = os.environ.get(ENV_JOBS)
    if not env:
        return 1
    try:
        return int(env)
    except ValueError:
        raise ConfigError(f"{ENV_JOBS} must be an integer, got {env!r}") from None


def _output_dir(cli_value: Path | None, config: ExperimentConfig) -> Path:
    if cli_value is not None:
        return cli_value
    env = os.environ.get(ENV_OUTPUT_DIR)
    return Path(env) if env else config.output_dir


def _with_best_smola(scores: dict) -> dict:
    family = [str(h) for h in SMOLA_QUANTILES]
    if SMOLA_LABEL in scores or not all(m in scores for m in family):
        return scores
    return {**scores, SMOLA_LABEL: best_of(scores, family, SMOLA_LABEL)}


def _report(scores, dataset: str, scenario: str) -> ExperimentReport:
    scores = _with_best_smola(scores)
    reference = REFERENCE_METHOD if REFERENCE_METHOD in scores else next(iter(scores))
    if reference != REFERENCE_METHOD:
        logger.info("%s: no %s run; comparing against %s", dataset, REFERENCE_METHOD, reference)
    return compare_methods(scores, reference, dataset=dataset, scenario=scenario)


def cmd_run(args: argparse.Namespace) -> int:
    config = load_config(args.config).with_overrides(base_seed=args.seed)
    output_dir = _output_dir(args.output_dir, config)
    n_jobs = _jobs(args.jobs)
    strategies = strategies_for(config.methods, config.scenarios)

    reports = []
    for entry in config.datasets:
        log.rule(entry.name)
        dataset = load_dataset(entry.path, entry.format, entry.label_column, entry.name)
        scores = run_strategies(
            dataset,
            strategies,
            config.cv,
            config.solver,
            n_jobs=n_jobs,
            pair_budget=config.pair_budget,
        )
        reports.append(_report(scores, dataset.name, "supervised"))
        if config.semi_supervised is not None:
            semi_scores = run_strategies(
                dataset,
                strategies,
                config.cv,
                config.solver,
                config.semi_supervised,
                n_jobs=n_jobs,
                pair_budget=config.pair_budget,
            )
            reports.append(_report(semi_scores, dataset.name, "semi_supervised"))

    for path in publish_reports(reports, output_dir):
        logger.info("Wrote %s", path)
    return 0


def cmd_report(args: argparse.Namespace) -> int:
    """Rebuild summary.md and verdicts.md from the scores CSVs of an earlier run."""
    paths = sorted(args.results_dir.glob("*.csv"))
    if not paths:
        raise ReportError(f"no scores CSV in {args.results_dir}")
    reports = [
        _report(scores, dataset, scenario)
        for path in paths
        for (dataset, scenario), scores in read_scores_csv(path).items()
    ]
    for path in publish_reports(reports, args.results_dir):
        logger.info("Wrote %s", path)
    return 0


def cmd_surface(args: argparse.Namespace) -> int:
    low, high = args.exponents
    if low > high:
        raise ConfigError(f"--exponents: {low} > {high}")
    values = [10.0**e for e in range(low, high + 1)]
    dataset = load_dataset(args.path, args.format, args.label_column)
    surface = accuracy_surface(dataset, values, values, k=args.k, seed=args.seed)
    heuristics = [HeuristicId.parse(h) for h in args.heuristics.split(",") if h.strip()]
    positions = heuristic_positions(dataset, heuristics, seed=args.seed)
    for path in publish_surface(surface, positions, args.output_dir, dataset.name):
        logger.info("Wrote %s", path)
    return 0


def cmd_estimate(args: argparse.Namespace) -> int:
    dataset = load_dataset(args.path, args.format, args.label_column)
    heuristic = HeuristicId.parse(args.heuristic)
    x = transform(fit_scaler(dataset.features), dataset.features)
    inp = HeuristicInput.from_features(
        x, dataset.labels, dataset.n_classes, pair_budget=args.pair_budget, seed=args.seed
    )
    print(estimate(heuristic, inp))
    return 0


def cmd_zero_rule(args: argparse.Namespace) -> int:
    dataset = load_dataset(args.path, args.format, args.label_column)
    print(f"{zero_rule_accuracy(dataset):.1f}")
    return 0


def cmd_describe(args: argparse.Namespace) -> int:
    summary = describe(load_dataset(args.path, args.format, args.label_column))
    log.table(summary.as_row(), title=summary.name, key_name="Property", value_name="Value")
    return 0


def cmd_versions(args: argparse.Namespace) -> int:
    show_version()
    return 0


def _label_column(text: str) -> int | str:
    return text if text == "last" else int(text)


def build_parser() -> argparse.ArgumentParser:
    parser = argparse.ArgumentParser(
        prog="ews-svm-heuristics",
        description="Unsupervised RBF-SVM parameter heuristics and their benchmark.",
    )
    parser.add_argument("--version", action="version", version=f"%(prog)s {__version__}")
    parser.add_argument(
        "-v", "--verbose", action="count", default=0, help="more logging (repeat for debug)"
    )
    parser.add_argument("-q", "--quiet", action="store_true", help="warnings and errors only")
    sub = parser.add_subparsers(dest="command", required=True)

    run = sub.add_parser("run", help="run every dataset x strategy in a TOML config")
    run.add_argument("config", type=Path)
    run.add_argument("--seed", type=int, default=None, help="base seed (overrides config)")
    run.add_argument("--jobs", type=int, default=None, help=f"worker processes [{ENV_JOBS}]")
    run.add_argument(
        "--output-dir", type=Path, default=None, help=f"report directory [{ENV_OUTPUT_DIR}]"
    )
    run.set_defaults(handler=cmd_run)

    def dataset_command(name: str, help_text: str, handler):
        p = sub.add_parser(name, help=help_text)
        p.add_argument("path", type=Path)
        p.add_argument("--format", choices=("csv", "keel"), default="keel")
        p.add_argument("--label-column", type=_label_column, default="last")
        p.set_defaults(handler=handler)
        return p

    est = dataset_command("estimate", "print a heuristic's (C, gamma)", cmd_estimate)
    est.add_argument("--heuristic", required=True, help="heuristic id, e.g. covtrace")
    est.add_argument("--pair-budget", type=int, default=PAIR_BUDGET)
    est.add_argument("--seed", type=int, default=0, help="seed for distance sampling")
    dataset_command("zero-rule", "print the majority-class accuracy (%%)", cmd_zero_rule)
    dataset_command("describe", "print a dataset summary", cmd_describe)
    surface = dataset_command(
        "surface", "write mean CV accuracy over a (gamma, C) grid as CSV", cmd_surface
    )
    surface.add_argument(
        "--exponents",
        type=int,
        nargs=2,
        default=(-5, 5),
        metavar=("LOW", "HIGH"),
        help="gamma and C run over 10^LOW ... 10^HIGH",
    )
    surface.add_argument("--k", type=int, default=K_EXTERNAL, help="CV folds")
    surface.add_argument("--seed", type=int, default=0)
    surface.add_argument(
        "--heuristics",
        default=",".join(str(h) for h in HeuristicId),
        help="comma-separated ids whose estimates are written next to the surface",
    )
    surface.add_argument("--output-dir", type=Path, default=Path(OUTPUT_DIR) / "surface")
    report = sub.add_parser("report", help="rebuild the Markdown reports from scores CSVs")
    report.add_argument("results_dir", type=Path)
    report.set_defaults(handler=cmd_report)
    sub.add_parser("versions", help="print package and dependency versions").set_defaults(
        handler=cmd_versions
    )
    return parser


def main(argv: list[str] | None = None) -> int:
    parser = build_parser()
    args = parser.parse_args(argv)
    verbosity = 0 if args.quiet else 1 + args.verbose
    log.create_logger(verbosity=verbosity)
    try:
        return args.handler(args)
    except SvmHeuristicsError as e:
        if verbosity >= 2:
            logger.exception("command failed")
        print(f"error[{e.code}]: {e}", file=sys.stderr)
        return EXIT_FAILURE
    except OSError as e:
        print(f"error[E_IO]: {e}", file=sys.stderr)
        return EXIT_FAILURE


if __name__ == "__main__":
    sys.exit(main())
