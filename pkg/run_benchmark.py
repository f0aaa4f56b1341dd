from __future__ import annotations

import sys

from ews_svm_heuristics.cli import main as cli_main

CONFIG_FILE = "configs/example.toml"


def main():
    """Run the benchmark described by a TOML config (default: configs/example.toml).

    Any ``run`` flags pass through: ``run_benchmark.py --seed 1 --jobs 4``.
    """
    args = sys.argv[1:]
    if not args or args[0].startswith("-"):
        args = [CONFIG_FILE, *args]
    return cli_main(["run", *args])


if __name__ == "__main__":
    sys.exit(main())
