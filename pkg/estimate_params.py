from __future__ import annotations

import sys

from ews_svm_heuristics import log
from ews_svm_heuristics.data import fit_scaler, load_dataset, transform
from ews_svm_heuristics.errors import SvmHeuristicsError
from ews_svm_heuristics.heuristics import HeuristicId, HeuristicInput, estimate


def main(argv: list[str] | None = None) -> int:
    """Print every heuristic's (C, gamma) for one KEEL dataset."""
    args = sys.argv[1:] if argv is None else argv
    if len(args) != 1:
        print("usage: estimate_params.py <dataset.dat>", file=sys.stderr)
        return 2

    try:
        dataset = load_dataset(args[0])
        x = transform(fit_scaler(dataset.features), dataset.features)
    except SvmHeuristicsError as e:
        print(f"error[{e.code}]: {e}", file=sys.stderr)
        return 2
    inp = HeuristicInput.from_features(x, dataset.labels, dataset.n_classes)

    rows = {}
    for heuristic in HeuristicId:
        try:
            rows[str(heuristic)] = str(estimate(heuristic, inp))
        except SvmHeuristicsError as e:
            rows[str(heuristic)] = f"error[{e.code}]: {e}"
    log.table(rows, title=dataset.name, key_name="Heuristic", value_name="Estimate")
    return 0


if __name__ == "__main__":
    sys.exit(main())
