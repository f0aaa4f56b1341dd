from __future__ import annotations

from ews_svm_heuristics._version import __version__, get_version, get_version_info  # isort:skip

__all__ = ["__version__", "get_version", "get_version_info"]
