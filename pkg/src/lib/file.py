"""File system library."""

import logging
import os
from collections.abc import Sequence

import numpy as np

logger = logging.getLogger(__name__)


def ensure_parent(file_path: str) -> str:
    """Create the parent directory of `file_path` and return the expanded path."""
    expand_path = os.path.abspath(os.path.expanduser(file_path))
    os.makedirs(os.path.dirname(expand_path), exist_ok=True)
    return expand_path


def get_blake3(file_path: str, chunksize: int = 1024 * 1024) -> str:
    """Generate blake3 hash for a file.

    Parameters
    ----------
    file_path : str
        Path to the file to hash.
    chunksize : int
        Chunk size to read

    Returns
    -------
    str
        blake3 hash.

    """
    from blake3 import blake3

    m = blake3()
    with open(file_path, "rb") as f:
        while chunk := f.read(chunksize):
            m.update(chunk)

    return m.hexdigest()


def write_columns(
    file_path: str,
    header: Sequence[str],
    columns: Sequence[np.ndarray | Sequence[float]],
    fmt: str | Sequence[str] = "%.10g",
) -> str:
    """Write equal-length columns as a CSV file.

    Parameters
    ----------
    file_path : str
        Destination; a `.gz` suffix compresses the output.
    header : Sequence[str]
        Column names, written as the first line.
    columns : Sequence[np.ndarray | Sequence[float]]
        Column data.
    fmt : str | Sequence[str]
        `numpy.savetxt` format(s).

    Returns
    -------
    str
        Path written.

    """
    path = ensure_parent(file_path)
    data = np.column_stack([np.asarray(c, dtype=float) for c in columns])
    np.savetxt(path, data, delimiter=",", header=",".join(header), comments="", fmt=fmt)
    logger.debug(f"Wrote {data.shape[0]} rows to {file_path}")
    return path


def read_columns(file_path: str) -> dict[str, np.ndarray]:
    """Read a CSV written by `write_columns`.

    Returns
    -------
    dict[str, np.ndarray]
        Column name to values.

    """
    import gzip

    opener = gzip.open if file_path.endswith(".gz") else open
    with opener(file_path, "rt") as f:
        header = f.readline().strip().split(",")
        data = np.loadtxt(f, delimiter=",", ndmin=2)

    return {name: data[:, i] for i, name in enumerate(header)}


def write_json(file_path: str, content: object) -> str:
    """Write `content` as indented JSON with sorted keys.

    Parameters
    ----------
    file_path : str
        Destination.
    content : object
        JSON-serialisable object; numpy scalars and arrays are converted.

    Returns
    -------
    str
        Path written.

    """
    import json

    def default(obj: object):
        if isinstance(obj, np.ndarray):
            return obj.tolist()
        if isinstance(obj, np.generic):
            return obj.item()
        raise TypeError(f"{type(obj).__name__} is not JSON serialisable")

    path = ensure_parent(file_path)
    with open(path, "w") as f:
        json.dump(content, f, indent=2, sort_keys=True, default=default)
        f.write("\n")

    logger.debug(f"Wrote {file_path}")
    return path


def write_metadata(
    out_dir: str,
    data_files: Sequence[str],
    seed: int | None,
    config: dict[str, dict[str, str]],
) -> str:
    """Write `metadata.json` describing a run.

    Parameters
    ----------
    out_dir : str
        Output directory of the run.
    data_files : Sequence[str]
        Files produced by the run; their blake3 digests are recorded.
    seed : int | None
        Seed used by the run.
    config : dict[str, dict[str, str]]
        Resolved configuration.

    Returns
    -------
    str
        Path of the metadata file.

    """
    from datetime import datetime, timezone
    from importlib.metadata import PackageNotFoundError, version

    try:
        package_version = version("dressed-thermo")
    except PackageNotFoundError:
        package_version = "unknown"

    digests = {
        os.path.relpath(p, out_dir): get_blake3(p) for p in sorted(data_files)
    }
    return write_json(
        os.path.join(out_dir, "metadata.json"),
        {
            "timestamp": datetime.now(timezone.utc).isoformat(),
            "version": package_version,
            "seed": seed,
            "config": config,
            "blake3": digests,
        },
    )
