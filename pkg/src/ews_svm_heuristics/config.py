"""Experiment configuration read from TOML.

```toml
base_seed = 0
output_dir = "results"
methods = ["default", "covtrace", "Chapelle"]
scenarios = ["heuristic", "gscv_default", "gscv_seeded"]

[cv]
k_external = 5
k_internal = 3
repetitions = 10

[solver]
tolerance = 1e-3
max_passes = 10
cache_rows = 4000

[semi_supervised]          # optional; adds a semi-supervised run per dataset
fraction = 0.1
min_per_class = 5

[[datasets]]
name = "iris"
path = "data/iris.dat"     # relative to this file
format = "keel"
label_column = "last"
```
"""

from __future__ import annotations

import dataclasses
import tomllib
from dataclasses import dataclass, field
from pathlib import Path
from typing import Literal

from ews_svm_heuristics.constants import BASE_SEED, OUTPUT_DIR, PAIR_BUDGET
from ews_svm_heuristics.errors import ConfigError, SvmHeuristicsError
from ews_svm_heuristics.evaluation import CvConfig, Scenario, SemiSupervisedConfig
from ews_svm_heuristics.heuristics import HeuristicId
from ews_svm_heuristics.svm import SolverConfig

FORMATS = ("csv", "keel")


@dataclass(frozen=True)
class DatasetSpec:
    name: str
    path: Path
    format: Literal["csv", "keel"] = "keel"
    label_column: int | Literal["last"] = "last"


@dataclass(frozen=True)
class ExperimentConfig:
    datasets: tuple[DatasetSpec, ...]
    methods: tuple[HeuristicId, ...]
    scenarios: tuple[Scenario, ...] = (Scenario.HEURISTIC,)
    cv: CvConfig = field(default_factory=CvConfig)
    solver: SolverConfig = field(default_factory=SolverConfig)
    semi_supervised: SemiSupervisedConfig | None = None
    output_dir: Path = Path(OUTPUT_DIR)
    base_seed: int = BASE_SEED
    pair_budget: int = PAIR_BUDGET

    def __post_init__(self):
        if not self.datasets:
            raise ConfigError("at least one [[datasets]] entry is required")
        if not self.methods:
            raise ConfigError("methods must list at least one heuristic")
        if not self.scenarios:
            raise ConfigError("scenarios must list at least one scenario")

    def with_overrides(
        self, *, base_seed: int | None = None, output_dir: Path | None = None
    ) -> ExperimentConfig:
        changes: dict[str, object] = {}
        if base_seed is not None:
            changes["base_seed"] = base_seed
            changes["cv"] = dataclasses.replace(self.cv, base_seed=base_seed)
        if output_dir is not None:
            changes["output_dir"] = Path(output_dir)
        return dataclasses.replace(self, **changes)


def _section(doc: dict, key: str) -> dict:
    value = doc.get(key, {})
    if not isinstance(value, dict):
        raise ConfigError(f"[{key}] must be a table")
    return value


def _build(factory, values: dict, prefix: str):
    known = {f.name for f in dataclasses.fields(factory)}
    unknown = sorted(set(values) - known)
    if unknown:
        raise ConfigError(f"unknown key(s) in [{prefix}]: {unknown}")
    try:
        return factory(**values)
    except ConfigError:
        raise
    except (SvmHeuristicsError, TypeError) as e:
        raise ConfigError(f"[{prefix}]: {e}") from e


def _dataset(entry: dict, root: Path, index: int) -> DatasetSpec:
    where = f"datasets[{index}]"
    if "path" not in entry:
        raise ConfigError(f"{where}.path is required")
    path = Path(entry["path"])
    if not path.is_absolute():
        path = root / path
    if not path.is_file():
        raise ConfigError(f"{where}.path does not exist: {path}")
    fmt = entry.get("format", "keel")
    if fmt not in FORMATS:
        raise ConfigError(f"{where}.format must be one of {FORMATS}, got {fmt!r}")
    label_column = entry.get("label_column", "last")
    if label_column != "last" and not isinstance(label_column, int):
        raise ConfigError(f"{where}.label_column must be 'last' or an integer")
    return DatasetSpec(
        name=str(entry.get("name", path.stem)),
        path=path,
        format=fmt,
        label_column=label_column,
    )


def parse_config(doc: dict, root: Path) -> ExperimentConfig:
    """Validate a parsed TOML document; relative paths resolve against ``root``."""
    base_seed = doc.get("base_seed", BASE_SEED)
    if not isinstance(base_seed, int):
        raise ConfigError(f"base_seed must be an integer, got {base_seed!r}")

    try:
        methods = tuple(HeuristicId.parse(m) for m in doc.get("methods", []))
    except SvmHeuristicsError as e:
        raise ConfigError(f"methods: {e}") from e
    try:
        scenarios = tuple(Scenario(s) for s in doc.get("scenarios", ["heuristic"]))
    except ValueError as e:
        valid = [s.value for s in Scenario]
        raise ConfigError(f"scenarios: {e}; valid: {valid}") from e

    cv = _build(CvConfig, {**_section(doc, "cv"), "base_seed": base_seed}, "cv")
    solver = _build(SolverConfig, _section(doc, "solver"), "solver")
    semi = None
    if "semi_supervised" in doc:
        semi = _build(SemiSupervisedConfig, _section(doc, "semi_supervised"), "semi_supervised")

    entries = doc.get("datasets", [])
    if not isinstance(entries, list):
        raise ConfigError("datasets must be an array of tables ([[datasets]])")
    datasets = tuple(_dataset(entry, root, i) for i, entry in enumerate(entries))

    output_dir = Path(doc.get("output_dir", OUTPUT_DIR))
    if not output_dir.is_absolute():
        output_dir = root / output_dir

    pair_budget = doc.get("pair_budget", PAIR_BUDGET)
    if not isinstance(pair_budget, int) or pair_budget < 1:
        raise ConfigError(f"pair_budget must be a positive integer, got {pair_budget!r}")

    return ExperimentConfig(
        datasets=datasets,
        methods=methods,
        scenarios=scenarios,
        cv=cv,
        solver=solver,
        semi_supervised=semi,
        output_dir=output_dir,
        base_seed=base_seed,
        pair_budget=pair_budget,
    )


def load_config(path: str | Path) -> ExperimentConfig:
    path = Path(path)
    if not path.is_file():
        raise ConfigError(f"config file not found: {path}")
    try:
        doc = tomllib.loads(path.read_text(encoding="utf-8"))
    except tomllib.TOMLDecodeError as e:
        raise ConfigError(f"{path}: {e}") from e
    return parse_config(doc, path.parent)
