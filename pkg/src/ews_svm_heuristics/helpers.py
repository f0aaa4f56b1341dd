from __future__ import annotations

import hashlib
import logging
import os
import tempfile
from pathlib import Path

import numpy as np
import pandas as pd

logger = logging.getLogger(__name__)


def derive_seed(*keys: int) -> int:
    """Deterministic 32-bit seed from integer keys (repetition seed, fold, purpose, ...).

    Uses numpy's SeedSequence so different key tuples give statistically independent streams
    and the mapping does not depend on PYTHONHASHSEED.
    """
    return int(np.random.SeedSequence([int(k) for k in keys]).generate_state(1)[0])


def calculate_frame_hash(frame: pd.DataFrame) -> str:
    """Content hash of a frame, ignoring how (or whether) it was written to disk."""
    return str(pd.util.hash_pandas_object(frame, index=True).sum())


def fingerprint_indices(indices: np.ndarray) -> str:
    """Short order-independent digest of a set of row indices."""
    arr = np.sort(np.asarray(indices, dtype=np.int64))
    return hashlib.sha256(arr.tobytes()).hexdigest()[:16]


def is_data_updated(new_hash: str, hash_file: Path) -> bool:
    """Check if ``new_hash`` differs from the one recorded by the previous run."""
    if hash_file.exists() and hash_file.read_text().strip() == new_hash:
        logger.info("%s: content identical to previous run", hash_file.stem)
        return False
    return True


def atomic_write_text(path: Path, text: str) -> None:
    """Write via a sibling temp file and ``os.replace`` so readers never see partial output."""
    path = Path(path)
    path.parent.mkdir(parents=True, exist_ok=True)
    fd, tmp = tempfile.mkstemp(dir=path.parent, prefix=f".{path.name}.", suffix=".tmp")
    try:
        with os.fdopen(fd, "w", encoding="utf-8", newline="\n") as f:
            f.write(text)
        Path(tmp).replace(path)
    except BaseException:
        Path(tmp).unlink(missing_ok=True)
        raise


def publish_frame(frame: pd.DataFrame, output_dir: Path, file_name: str) -> bool:
    """Hash-gate then write ``<file_name>.csv``. Returns True when the file was (re)written.

    The CSV is rewritten when the hash file is stale or the CSV itself is missing.
    """
    output_dir = Path(output_dir)
    output_dir.mkdir(parents=True, exist_ok=True)
    csv_path = output_dir / f"{file_name}.csv"
    hash_file = output_dir / f"{file_name}.hash"
    new_hash = calculate_frame_hash(frame)
    if not is_data_updated(new_hash, hash_file) and csv_path.is_file():
        return False
    atomic_write_text(csv_path, frame.to_csv(index=False, lineterminator="\n"))
    # recorded only once the CSV is in place
    atomic_write_text(hash_file, new_hash)
    logger.info("Saved %s", csv_path)
    return True
