from __future__ import annotations


class SvmHeuristicsError(Exception):
    """Base for every error the package raises on purpose.

    ``code`` is the stable prefix the CLI prints (``error[E_DATA]: ...``) so failures can be
    grepped from batch logs.
    """

    code = "E_GENERIC"


class DataError(SvmHeuristicsError, ValueError):
    code = "E_DATA"


class StratificationError(DataError):
    """A class is too small for the requested number of stratified folds."""

    code = "E_STRATIFY"


class HeuristicError(SvmHeuristicsError, ValueError):
    """A parameter heuristic hit a degenerate input (zero variance, zero quantile, ...)."""

    code = "E_HEURISTIC"


class SolverError(SvmHeuristicsError, ValueError):
    code = "E_SOLVER"


class ConfigError(SvmHeuristicsError, ValueError):
    code = "E_CONFIG"


class ReportError(SvmHeuristicsError, ValueError):
    code = "E_REPORT"
