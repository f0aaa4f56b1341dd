from __future__ import annotations

import logging
from collections.abc import Mapping

from rich.console import Console
from rich.logging import RichHandler
from rich.table import Table

_console = Console(stderr=True)
_out = Console()

_LEVELS = {0: logging.WARNING, 1: logging.INFO}


def create_logger(name: str = "", verbosity: int = 1) -> logging.Logger:
    """Configure the ``ews_svm_heuristics`` logger tree (or ``name``) with a rich handler.

    Library modules only call ``logging.getLogger(__name__)``; handlers are attached here,
    once, by whatever owns the process (CLI, entry scripts, notebooks).
    """
    logger = logging.getLogger(name or "ews_svm_heuristics")
    logger.setLevel(_LEVELS.get(verbosity, logging.DEBUG))
    if not any(isinstance(h, RichHandler) for h in logger.handlers):
        handler = RichHandler(console=_console, show_path=verbosity >= 2, markup=False)
        handler.setFormatter(logging.Formatter("%(message)s"))
        logger.addHandler(handler)
    logger.propagate = False
    return logger


def rule(title: str) -> None:
    _out.rule(title)


def table(
    rows: Mapping[str, object],
    title: str = "",
    key_name: str = "Key",
    value_name: str = "Value",
) -> None:
    """Print a two-column table (package versions, parameter estimates, dataset summaries)."""
    t = Table(title=title or None)
    t.add_column(key_name)
    t.add_column(value_name, justify="right")
    for key, value in rows.items():
        t.add_row(str(key), str(value))
    _out.print(t)
