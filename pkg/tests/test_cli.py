"""Tests for the command-line interface."""

from __future__ import annotations

from pathlib import Path

import polars as pl
import pytest

from nestocc.cli import build_parser, main
from nestocc.io import read_results_csv

DIRICHLET_RUN = """
[environment]
kind = "dirichlet_split"
m = 2
alpha = 1.0

[run]
mode = "tree_first"
n_list = [200]
a = 0.75
replicas = 2
master_seed = 3
"""

DIRICHLET_VERIFY = """
[environment]
kind = "dirichlet_split"
m = 2
alpha = 1.0

[verify]
check = "local_limit"
theta = 1.0
j_list = [4, 6]
seeds = 2
"""


def _write(tmp_path: Path, name: str, text: str) -> Path:
    path = tmp_path / name
    path.write_text(text, encoding="utf-8")
    return path


def test_classify_default_environment(capsys: pytest.CaptureFixture[str]) -> None:
    assert main(["classify", "--a", "0.75"]) == 0
    assert capsys.readouterr().out.strip() == "IIC (θ=1.3333)"


def test_classify_freezing(tmp_path: Path, capsys: pytest.CaptureFixture[str]) -> None:
    config = _write(tmp_path, "d.toml", DIRICHLET_VERIFY)
    assert main(["classify", "--config", str(config), "--a", "1.5"]) == 0
    assert capsys.readouterr().out.strip() == "Freezing (θ=-0.3333)"


def test_spectral_prints_constants(tmp_path: Path, capsys: pytest.CaptureFixture[str]) -> None:
    out = tmp_path / "constants.csv"
    assert main(["spectral", "--out", str(out)]) == 0
    text = capsys.readouterr().out
    assert "theta*=2.718281828" in text
    assert "a_bar=inf" in text
    assert pl.read_csv(out)["a_c"][0] == pytest.approx(1.0)


def test_predict_regime_one(capsys: pytest.CaptureFixture[str]) -> None:
    assert main(["predict", "--a", "0.2", "--n", "1000"]) == 0
    assert capsys.readouterr().out.strip() == "I exact_n=1000 j=35"


def test_predict_forced_regime(capsys: pytest.CaptureFixture[str]) -> None:
    assert main(["predict", "--a", "1.0", "--n", "1e5", "--regime", "III"]) == 0
    assert capsys.readouterr().out.startswith("III fraction=0.5")


def test_simulate_writes_results_and_manifest(
    tmp_path: Path, capsys: pytest.CaptureFixture[str]
) -> None:
    config = _write(tmp_path, "run.toml", DIRICHLET_RUN)
    out = tmp_path / "out" / "run.csv"
    assert main(["simulate", "--config", str(config), "--out", str(out), "--seed", "4"]) == 0
    rows = read_results_csv(out)
    assert rows.height == 2
    assert (tmp_path / "out" / "run.manifest.json").exists()
    captured = capsys.readouterr()
    assert "regime        IV" in captured.out
    assert "[nestocc] wrote" in captured.err


def test_simulate_default_output(tmp_path: Path) -> None:
    config = _write(tmp_path, "myrun.toml", DIRICHLET_RUN)
    assert main(["simulate", "--config", str(config)]) == 0
    assert (tmp_path / "runs" / "myrun.results.csv").exists()


def test_verify_llt(tmp_path: Path, capsys: pytest.CaptureFixture[str]) -> None:
    config = _write(tmp_path, "v.toml", DIRICHLET_VERIFY)
    out = tmp_path / "verify.csv"
    assert main(["verify-llt", "--config", str(config), "--out", str(out)]) == 0
    assert "j=4 median sup_discrepancy=" in capsys.readouterr().out
    assert pl.read_csv(out).height == 4


def test_sweep_reports_boundaries(capsys: pytest.CaptureFixture[str]) -> None:
    assert main(["sweep", "--a-min", "0.2", "--a-max", "2.0", "--a-step", "0.1"]) == 0
    out = capsys.readouterr().out
    assert "boundary near a=0.4000: I -> IIA" in out
    assert "alpha peaks at" in out


def test_errors_are_reported(capsys: pytest.CaptureFixture[str]) -> None:
    assert main(["classify", "--a", "-1"]) == 1
    assert "[nestocc] error:" in capsys.readouterr().err


def test_missing_config_is_an_error(tmp_path: Path, capsys: pytest.CaptureFixture[str]) -> None:
    assert main(["simulate", "--config", str(tmp_path / "nope.toml")]) == 1
    assert "not found" in capsys.readouterr().err


def test_parser_rejects_unknown_regime() -> None:
    with pytest.raises(SystemExit):
        build_parser().parse_args(["predict", "--a", "1", "--n", "10", "--regime", "V"])
