"""Reading and writing result tables and tree levels.

Key functions:
    - write_csv(): Write a table with every float at 17 significant digits
    - write_results_csv(): Write experiment rows under the fixed header
    - read_results_csv(): Read experiment rows back with their schema
    - dump_level() / load_level(): Binary level records (docs/FORMATS.md)
"""

from __future__ import annotations

import logging
import struct
from pathlib import Path

import numpy as np
import polars as pl

from ._internal.validation import validate_no_duplicates, validate_schema
from .exceptions import ConfigurationError
from .experiment import RESULT_COLUMNS, RESULT_SCHEMA, ROW_KEYS
from .tree import WeightedTree

logger = logging.getLogger(__name__)

_LEVEL_COUNT = struct.Struct("<Q")
_LEVEL_DTYPE = np.dtype([("weight", "<f8"), ("position", "<f8")])


def format_float(value: float) -> str:
    """Format a float with 17 significant digits (round-trip exact)."""
    return format(value, ".17g")


def _stringify_floats(df: pl.DataFrame) -> pl.DataFrame:
    float_cols = [name for name, dtype in df.schema.items() if dtype in (pl.Float32, pl.Float64)]
    return df.with_columns(
        [
            pl.col(name).map_elements(format_float, return_dtype=pl.Utf8).alias(name)
            for name in float_cols
        ]
    )


def write_csv(df: pl.DataFrame, path: str | Path) -> Path:
    """Write a table as CSV, floats at 17 significant digits, nulls empty.

    Args:
        df: Table to write.
        path: Output path; parent directories are created.

    Returns:
        The written path.
    """
    path = Path(path)
    path.parent.mkdir(parents=True, exist_ok=True)
    _stringify_floats(df).write_csv(path, null_value="")
    logger.info("Wrote %d rows to %s", df.height, path)
    return path


def write_results_csv(rows: pl.DataFrame, path: str | Path) -> Path:
    """Write experiment rows with the header
    ``replica,n_or_t,j,k,K,L,Z,W_theta_json,predicted,relative_error,overflow_balls``.

    Raises:
        ValueError: If a required column is missing or a (replica, n_or_t, j, k) key repeats.
    """
    validate_schema(rows, RESULT_COLUMNS)
    validate_no_duplicates(rows, ROW_KEYS)
    return write_csv(rows.select(RESULT_COLUMNS), path)


def read_results_csv(path: str | Path) -> pl.DataFrame:
    """Read experiment rows written by ``write_results_csv``.

    Raises:
        FileNotFoundError: If the file does not exist.
        ValueError: If the header differs from the result columns.
    """
    path = Path(path)
    if not path.exists():
        raise FileNotFoundError(f"Results file not found: {path}")
    df = pl.read_csv(path, schema_overrides=RESULT_SCHEMA, null_values="")
    validate_schema(df, RESULT_COLUMNS)
    if df.columns != RESULT_COLUMNS:
        raise ValueError(f"Unexpected column order in {path}: {df.columns}")
    return df


def dump_level(tree: WeightedTree, j: int, path: str | Path) -> Path:
    """Dump level j as a little-endian u64 box count followed by (weight, position) f64 pairs."""
    level = tree.level(j)
    records = np.empty(level.size, dtype=_LEVEL_DTYPE)
    records["weight"] = level.weight
    records["position"] = level.position
    path = Path(path)
    path.parent.mkdir(parents=True, exist_ok=True)
    with path.open("wb") as f:
        f.write(_LEVEL_COUNT.pack(level.size))
        f.write(records.tobytes())
    return path


def load_level(path: str | Path) -> tuple[np.ndarray, np.ndarray]:
    """Load a level dumped by ``dump_level``.

    Returns:
        (weights, positions) arrays.

    Raises:
        ConfigurationError: If the file is truncated or has trailing bytes.
    """
    data = Path(path).read_bytes()
    if len(data) < _LEVEL_COUNT.size:
        raise ConfigurationError(f"Level file {path} is shorter than its header")
    (count,) = _LEVEL_COUNT.unpack_from(data)
    body = data[_LEVEL_COUNT.size :]
    if len(body) != count * _LEVEL_DTYPE.itemsize:
        raise ConfigurationError(
            f"Level file {path} declares {count} boxes but holds {len(body)} payload bytes"
        )
    records = np.frombuffer(body, dtype=_LEVEL_DTYPE)
    return records["weight"].astype(np.float64), records["position"].astype(np.float64)
