from __future__ import annotations

import logging
from pathlib import Path

import numpy as np
import pytest
from sklearn import datasets as skdata

from ews_svm_heuristics.data import Dataset, load_dataset


def write_keel(
    path: Path,
    features: np.ndarray,
    labels,
    class_names=None,
    relation: str = "data",
) -> Path:
    """Write a KEEL ``.dat`` file; ``labels`` are indices into ``class_names`` when given."""
    n = features.shape[1]
    names = [f"x{j}" for j in range(n)]
    tokens = [str(class_names[y]) if class_names is not None else str(y) for y in labels]
    lines = [f"@relation {relation}"]
    lines += [f"@attribute {name} real" for name in names]
    lines.append(f"@attribute class {{{', '.join(dict.fromkeys(tokens))}}}")
    lines.append(f"@inputs {', '.join(names)}")
    lines.append("@outputs class")
    lines.append("@data")
    for row, token in zip(features, tokens, strict=True):
        lines.append(", ".join(repr(float(v)) for v in row) + f", {token}")
    path.write_text("\n".join(lines) + "\n", encoding="utf-8")
    return path


def _from_sklearn(loader, directory: Path, name: str) -> Path:
    bunch = loader()
    return write_keel(
        directory / f"{name}.dat",
        np.asarray(bunch.data, dtype=np.float64),
        bunch.target,
        [str(c).replace(" ", "_") for c in bunch.target_names],
        relation=name,
    )


@pytest.fixture(scope="session")
def keel_dir(tmp_path_factory) -> Path:
    return tmp_path_factory.mktemp("keel")


@pytest.fixture(scope="session")
def iris_path(keel_dir) -> Path:
    return _from_sklearn(skdata.load_iris, keel_dir, "iris")


@pytest.fixture(scope="session")
def wine_path(keel_dir) -> Path:
    return _from_sklearn(skdata.load_wine, keel_dir, "wine")


@pytest.fixture(scope="session")
def wdbc_path(keel_dir) -> Path:
    return _from_sklearn(skdata.load_breast_cancer, keel_dir, "wdbc")


@pytest.fixture(scope="session")
def wisconsin_path(keel_dir) -> Path:
    """Breast-cancer-wisconsin class layout (444 benign / 239 malignant, 9 ordinal features)."""
    rng = np.random.default_rng(7)
    labels = np.repeat([0, 1], [444, 239])
    centres = np.where(labels[:, None] == 0, 2.5, 7.0)
    features = np.clip(np.rint(centres + rng.normal(0, 1.5, (683, 9))), 1, 10)
    return write_keel(keel_dir / "wisconsin.dat", features, labels, ["2", "4"], "wisconsin")


@pytest.fixture(scope="session")
def glass_path(keel_dir) -> Path:
    """Glass identification class layout (214 rows, 6 classes, 9 features)."""
    rng = np.random.default_rng(11)
    labels = np.repeat(np.arange(6), [70, 76, 17, 13, 9, 29])
    features = labels[:, None] + rng.normal(0, 0.8, (214, 9))
    names = ["1", "2", "3", "5", "6", "7"]
    return write_keel(keel_dir / "glass.dat", features, labels, names, "glass")


@pytest.fixture(scope="session")
def sonar_path(keel_dir) -> Path:
    """Sonar class layout (97 rocks / 111 mines, 60 features in [0, 1])."""
    rng = np.random.default_rng(13)
    labels = np.repeat([0, 1], [97, 111])
    features = np.clip(rng.normal(0.3 + 0.1 * labels[:, None], 0.15, (208, 60)), 0, 1)
    return write_keel(keel_dir / "sonar.dat", features, labels, ["R", "M"], "sonar")


@pytest.fixture(scope="session")
def iris(iris_path) -> Dataset:
    return load_dataset(iris_path)


@pytest.fixture(scope="session")
def wine(wine_path) -> Dataset:
    return load_dataset(wine_path)


@pytest.fixture(scope="session")
def wdbc(wdbc_path) -> Dataset:
    return load_dataset(wdbc_path)


@pytest.fixture
def rng() -> np.random.Generator:
    return np.random.default_rng(12345)


def blobs(rng: np.random.Generator, sizes=(20, 20, 20), n: int = 2, spread: float = 0.5):
    """Well separated Gaussian clusters, one per class."""
    centres = 4.0 * np.eye(len(sizes), n)
    x = np.vstack([rng.normal(centres[c], spread, (size, n)) for c, size in enumerate(sizes)])
    y = np.repeat(np.arange(len(sizes)), sizes)
    return x, y


@pytest.fixture
def make_blobs(rng):
    return lambda sizes=(20, 20, 20), n=2, spread=0.5: blobs(rng, sizes, n, spread)


@pytest.fixture
def keel_writer():
    return write_keel


@pytest.fixture(autouse=True)
def _reset_package_logger():
    """Undo ``log.create_logger`` from CLI tests so caplog sees package records again."""
    yield
    logger = logging.getLogger("ews_svm_heuristics")
    logger.handlers.clear()
    logger.setLevel(logging.NOTSET)
    logger.propagate = True
