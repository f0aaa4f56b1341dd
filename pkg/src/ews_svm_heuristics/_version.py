from __future__ import annotations

import re
from importlib import metadata

DIST_NAME = "ews-svm-heuristics"


def get_version() -> str:
    """Return the installed package version for `ews-svm-heuristics`.

    This uses importlib.metadata and will raise `PackageNotFoundError` if
    the package is not installed. Callers must handle that if they expect
    the code to work in a non-installed developer tree.
    """
    return metadata.version(DIST_NAME)


def python_dependency_versions() -> dict[str, str]:
    """Return versions of the declared runtime dependencies that are installed.

    `ews-svm-heuristics versions` prints this next to the project version so a result
    table can be traced back to the numpy/scipy build that produced it. Missing packages
    are omitted.
    """
    out: dict[str, str] = {}
    requires = metadata.distribution(DIST_NAME).metadata.get_all("Requires-Dist") or []
    for req in requires:
        if "extra ==" in req:
            continue
        name = re.split(r"[<>=!~;\[( ]", req.strip(), maxsplit=1)[0]
        try:
            out[name] = metadata.version(name)
        except metadata.PackageNotFoundError:
            continue
    return out


def get_version_info() -> dict[str, object]:
    """Return ``{'project': {...}, 'python': {dependency: version}}``."""
    return {
        "project": {"name": DIST_NAME, "version": get_version()},
        "python": python_dependency_versions(),
    }


def show_version() -> None:
    """Print project and dependency versions as rich tables."""
    from ews_svm_heuristics import log

    info = get_version_info()
    log.table(info["project"], title="", key_name="Project", value_name="")
    py_deps = info.get("python", {})
    if py_deps:
        log.rule("Python Dependencies")
        log.table(dict(sorted(py_deps.items())), key_name="Package", value_name="Version")


try:
    __version__ = get_version()
except metadata.PackageNotFoundError:  # source checkout without install
    __version__ = "0+unknown"

__all__ = ["__version__", "get_version", "get_version_info", "show_version"]
