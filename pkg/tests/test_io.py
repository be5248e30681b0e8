from __future__ import annotations

from pathlib import Path

import numpy as np
import polars as pl
import pytest
from polars.testing import assert_frame_equal

from nestocc import ConfigurationError, run_experiment
from nestocc.experiment import RESULT_COLUMNS, RESULT_SCHEMA, parse_config
from nestocc.io import (
    dump_level,
    format_float,
    load_level,
    read_results_csv,
    write_csv,
    write_results_csv,
)
from nestocc.tree import WeightedTree


@pytest.fixture
def result_rows() -> pl.DataFrame:
    config = parse_config(
        {
            "environment": {"kind": "dirichlet_split", "m": 2, "alpha": 1.0},
            "run": {"n_list": [1000], "a": 0.75, "replicas": 2, "thetas": [1.0, 2.0]},
        }
    )
    return run_experiment(config).rows


def test_format_float_round_trips() -> None:
    assert format_float(0.1) == "0.10000000000000001"
    assert float(format_float(1 / 3)) == 1 / 3
    assert format_float(1000.0) == "1000"


def test_results_csv_header_and_values(tmp_path: Path, result_rows: pl.DataFrame) -> None:
    path = write_results_csv(result_rows, tmp_path / "out" / "results.csv")
    header = path.read_text(encoding="utf-8").splitlines()[0]
    assert header == "replica,n_or_t,j,k,K,L,Z,W_theta_json,predicted,relative_error,overflow_balls"
    assert_frame_equal(read_results_csv(path), result_rows)


def test_results_csv_writes_nulls_as_empty(tmp_path: Path) -> None:
    row = dict.fromkeys(RESULT_COLUMNS)
    row.update({"replica": 0, "n_or_t": 10.0, "j": 1, "k": 1, "K": 3, "W_theta_json": "{}"})
    df = pl.DataFrame([row], schema=RESULT_SCHEMA)
    path = write_results_csv(df, tmp_path / "nulls.csv")
    assert path.read_text(encoding="utf-8").splitlines()[1] == "0,10,1,1,3,,,{},,,"


def test_results_csv_requires_columns(tmp_path: Path) -> None:
    with pytest.raises(ValueError, match="Missing required columns"):
        write_results_csv(pl.DataFrame({"replica": [0]}), tmp_path / "bad.csv")
    with pytest.raises(FileNotFoundError):
        read_results_csv(tmp_path / "absent.csv")


def test_results_csv_rejects_repeated_keys(tmp_path: Path, result_rows: pl.DataFrame) -> None:
    with pytest.raises(ValueError, match="duplicate rows"):
        write_results_csv(pl.concat([result_rows, result_rows]), tmp_path / "dup.csv")
    assert not (tmp_path / "dup.csv").exists()


def test_write_csv_formats_floats(tmp_path: Path) -> None:
    path = write_csv(pl.DataFrame({"a": [0.1], "n": [3]}), tmp_path / "t.csv")
    assert path.read_text(encoding="utf-8").splitlines() == ["a,n", "0.10000000000000001,3"]


def test_level_dump(tmp_path: Path, dirichlet_tree: WeightedTree) -> None:
    path = dump_level(dirichlet_tree, 5, tmp_path / "level5.bin")
    level = dirichlet_tree.level(5)
    assert path.stat().st_size == 8 + 16 * level.size
    weights, positions = load_level(path)
    assert np.array_equal(weights, level.weight)
    assert np.array_equal(positions, level.position)


def test_truncated_level_dump_is_rejected(tmp_path: Path, dirichlet_tree: WeightedTree) -> None:
    path = dump_level(dirichlet_tree, 3, tmp_path / "level3.bin")
    path.write_bytes(path.read_bytes()[:-4])
    with pytest.raises(ConfigurationError, match="declares 8 boxes"):
        load_level(path)
    path.write_bytes(b"\x01")
    with pytest.raises(ConfigurationError, match="shorter than its header"):
        load_level(path)
