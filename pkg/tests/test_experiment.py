"""Tests for config parsing and the experiment runner."""

from __future__ import annotations

import json
import math
from dataclasses import replace
from pathlib import Path
from typing import Any

import polars as pl
import pytest
from polars.testing import assert_frame_equal

from nestocc import (
    ConfigurationError,
    EnvironmentSpec,
    ExperimentConfig,
    build_profile,
    load_config,
    run_experiment,
    run_verification,
    sweep,
)
from nestocc.experiment import (
    RESULT_COLUMNS,
    LevelRule,
    RunSection,
    default_output,
    parse_config,
)

CONFIG_DIR = Path(__file__).parent.parent / "configs"

DIRICHLET_ENV = {"kind": "dirichlet_split", "m": 2, "alpha": 1.0}
SIEVE_ENV = {"kind": "bernoulli_sieve", "law": "uniform"}


def _config(env: dict[str, Any] | None = None, **run: Any) -> ExperimentConfig:
    return parse_config({"environment": env or DIRICHLET_ENV, "run": run})


def test_parse_minimal_run() -> None:
    config = _config(n_list=[50, 200], j_list=[2, 4], replicas=3)
    run = config.run
    assert run is not None
    assert run.mode == "tree_first"
    assert run.sizes == (50.0, 200.0)
    assert run.depth() == 4
    assert run.report_ks() == (1,)
    assert config.environment == EnvironmentSpec.dirichlet_split(2, 1.0)


def test_parse_collects_every_problem() -> None:
    with pytest.raises(ConfigurationError) as excinfo:
        _config(n_list=[10], t_list=[10.0], mode="sideways")
    message = str(excinfo.value)
    assert "run.n_list|t_list" in message
    assert "run.a|j_list" in message
    assert "run.mode" in message


def test_parse_rejects_bad_sections() -> None:
    with pytest.raises(ConfigurationError, match="Unknown config sections"):
        parse_config({"environment": DIRICHLET_ENV, "bogus": {}})
    with pytest.raises(ConfigurationError, match="environment"):
        parse_config({"run": {"n_list": [10], "j_list": [1]}})
    with pytest.raises(ConfigurationError, match=r"\[spectral\] unknown keys"):
        parse_config({"environment": DIRICHLET_ENV, "spectral": {"grid": 3}})


def test_parse_rejects_bad_values() -> None:
    with pytest.raises(ConfigurationError, match="J_max"):
        _config(n_list=[10], j_list=[5], J_max=3)
    with pytest.raises(ConfigurationError, match="positive integers"):
        _config(n_list=[10.5], j_list=[1])
    with pytest.raises(ConfigurationError, match="run.regime"):
        _config(n_list=[10], a=0.5, regime="V")


def test_parse_spectral_section() -> None:
    config = parse_config(
        {
            "environment": SIEVE_ENV,
            "spectral": {"closed_form": False, "theta_min": 0.5, "samples": 500},
        }
    )
    assert not config.prefer_closed_form
    assert config.spectral is not None
    assert config.spectral.theta_min == 0.5
    assert config.run is None


def test_level_rule_levels() -> None:
    run = RunSection(
        mode="ball_driven", sizes=(1e5,), level_rule=LevelRule(a=0.5, k=3), k_list=(2,)
    )
    assert run.levels_for(1e5) == (23,)
    assert run.depth() == 23
    assert run.report_ks() == (1, 2, 3)


def test_shipped_configs_load() -> None:
    configs = {path.stem: load_config(path) for path in CONFIG_DIR.glob("*.toml")}
    assert set(configs) >= {"uniform_sieve", "regime1", "regime2", "regime3", "freezing", "local_limit"}
    freezing = configs["freezing"].run
    assert freezing is not None
    assert freezing.regime == "Freezing"
    assert freezing.levels_for(1e5) == (8,)
    verify = configs["local_limit"].verify
    assert verify is not None
    assert verify.check == "local_limit"
    assert verify.j_list == (10, 14, 18)
    assert configs["regime3"].run is not None
    assert configs["regime3"].run.levels_for(1e5) == (23,)


def test_load_config_errors(tmp_path: Path) -> None:
    with pytest.raises(ConfigurationError, match="not found"):
        load_config(tmp_path / "missing.toml")
    broken = tmp_path / "broken.toml"
    broken.write_text("[run\nmode = 1\n", encoding="utf-8")
    with pytest.raises(ConfigurationError, match="Malformed"):
        load_config(broken)


def test_run_experiment_rows() -> None:
    config = _config(n_list=[50, 200], j_list=[2, 4], k_list=[1, 2], replicas=3, master_seed=4)
    result = run_experiment(config)
    rows = result.rows
    assert rows.columns == RESULT_COLUMNS
    assert rows.height == 3 * 2 * 2 * 2
    assert rows["replica"].to_list()[:8] == [0] * 8
    assert rows["Z"].to_list() == [2**j for j in rows["j"].to_list()]
    k1 = rows.filter(pl.col("k") == 1)
    assert (k1["L"] == k1["Z"] - k1["K"]).all()
    assert rows["predicted"].null_count() == rows.height
    assert result.failed_replicas == ()
    assert result.acceptance_grade
    assert result.summary.height == 2 * 2 * 2
    assert result.realized_levels == ((50.0, 2, None), (50.0, 4, None), (200.0, 2, None), (200.0, 4, None))


def test_run_experiment_is_reproducible() -> None:
    config = _config(n_list=[100], j_list=[3], replicas=4, thetas=[2.0])
    first = run_experiment(config, seed=5)
    again = run_experiment(config, seed=5)
    other = run_experiment(config, seed=6)
    assert_frame_equal(first.rows, again.rows)
    assert first.rows["W_theta_json"].to_list() != other.rows["W_theta_json"].to_list()
    w = json.loads(first.rows["W_theta_json"][0])
    assert set(w) == {"2"}


def test_run_experiment_independent_of_workers() -> None:
    config = _config(n_list=[100], j_list=[2, 3], replicas=4, thetas=[2.0], master_seed=8)
    assert_frame_equal(run_experiment(config, threads=1).rows, run_experiment(config, threads=2).rows)


def test_regime_one_predictions() -> None:
    config = _config(SIEVE_ENV, mode="ball_driven", n_list=[1000], a=0.2, k_list=[1, 2], replicas=2)
    result = run_experiment(config)
    assert result.regime == ("I",)
    k1 = result.rows.filter(pl.col("k") == 1)
    assert (k1["j"] == 35).all()
    assert (k1["predicted"] == 1000.0).all()
    expected = ((1000 - k1["K"]).abs() / 1000).to_list()
    assert k1["relative_error"].to_list() == pytest.approx(expected)
    assert result.rows.filter(pl.col("k") == 2)["predicted"].null_count() == 2
    assert result.realized_levels[0][2] == pytest.approx(
        (math.log(1000) - 0.2 * 35) / math.sqrt(math.log(1000))
    )


def test_poissonized_run_predicts_count() -> None:
    config = _config(t_list=[100.0], a=0.75, replicas=2, master_seed=3)
    result = run_experiment(config)
    assert result.regime == ("IV",)
    run = config.run
    assert run is not None
    assert run.poissonized
    k1 = result.rows.filter(pl.col("k") == 1)
    assert (k1["j"] == 6).all()
    assert k1["predicted"].null_count() == 0
    assert (k1["predicted"] > 0).all()


def test_failed_replicas_are_reported(monkeypatch: pytest.MonkeyPatch) -> None:
    monkeypatch.setenv("NESTOCC_MEMORY_BUDGET_MB", "0.001")
    config = _config(SIEVE_ENV, n_list=[100], j_list=[1, 2, 3], mass_floor=1e-6, replicas=2)
    result = run_experiment(config)
    assert result.failed_replicas == (0, 1)
    assert result.rows.height == 2
    assert "MemoryBudgetError" in json.loads(result.rows["W_theta_json"][0])["error"]
    assert result.summary.height == 0


def test_run_experiment_rejects_bad_requests() -> None:
    with pytest.raises(ConfigurationError, match="tree_first"):
        run_experiment(_config(mode="ball_driven", n_list=[100], a=1.5, regime="Freezing"))
    with pytest.raises(ConfigurationError, match="threads"):
        run_experiment(_config(n_list=[10], j_list=[1]), threads=0)
    with pytest.raises(ConfigurationError, match=r"\[run\]"):
        run_experiment(ExperimentConfig(environment=EnvironmentSpec.bernoulli_sieve()))


def test_ball_driven_freezing_window_keeps_counts() -> None:
    config = _config(
        mode="ball_driven", n_list=[1000], a=1.5, replicas=2, master_seed=3, thetas=[1.0]
    )
    result = run_experiment(config)
    assert result.regime == ("Freezing",)
    assert result.failed_replicas == ()
    assert result.rows["j"].null_count() == 0
    assert (result.rows["j"] == 5).all()
    assert (result.rows["K"] > 0).all()
    assert result.rows["predicted"].null_count() == 2


def test_parse_rejects_repeated_sizes_and_sorts_levels() -> None:
    with pytest.raises(ConfigurationError, match="must not repeat"):
        _config(n_list=[100, 100], j_list=[1])
    run = _config(n_list=[100], j_list=[4, 2, 4]).run
    assert run is not None
    assert run.j_list == (2, 4)


def test_run_experiment_rejects_duplicate_rows() -> None:
    config = _config(n_list=[50], j_list=[2], replicas=1)
    assert config.run is not None
    repeated = replace(config, run=replace(config.run, j_list=(2, 2)))
    with pytest.raises(ValueError, match="duplicate rows"):
        run_experiment(repeated)


def test_run_verification() -> None:
    config = parse_config(
        {
            "environment": DIRICHLET_ENV,
            "verify": {"check": "local_limit", "theta": 1.0, "j_list": [4, 6], "seeds": 3},
        }
    )
    table = run_verification(config)
    assert table.columns == ["seed", "j", "theta", "check", "sup_discrepancy", "exact_level"]
    assert table.height == 6
    assert table["exact_level"].all()
    assert (table["sup_discrepancy"] >= 0).all()
    with pytest.raises(ConfigurationError, match=r"\[verify\]"):
        run_verification(_config(n_list=[10], j_list=[1]))


def test_verify_tail_check() -> None:
    config = parse_config(
        {
            "environment": DIRICHLET_ENV,
            "verify": {
                "check": "tail",
                "theta": 1.0,
                "j_list": [6],
                "seeds": 2,
                "delta": 0.25,
                "y_grid": [-1.0, 0.0, 1.0],
            },
        }
    )
    table = run_verification(config, seed=3)
    assert table["check"].to_list() == ["tail", "tail"]


def test_sweep_uniform_sieve(uniform_sieve: EnvironmentSpec) -> None:
    table = sweep(build_profile(uniform_sieve), [0.2, 0.45, 0.75, 1.0, 2.0])
    assert table["regime"].to_list() == ["I", "IIA", "IIC", "III", "IV"]
    assert table["alpha"][0] is None
    assert table["alpha"][1] == pytest.approx(0.4597, abs=1e-4)
    assert table["theta"][2] == pytest.approx(4 / 3)
    assert table["alpha"][3] == pytest.approx(1.0)


def test_default_output(tmp_path: Path) -> None:
    config = ExperimentConfig(environment=EnvironmentSpec.bernoulli_sieve())
    assert default_output(config, "results") == tmp_path / "runs" / "run.results.csv"
    named = ExperimentConfig(
        environment=EnvironmentSpec.bernoulli_sieve(), output=tmp_path / "x.csv"
    )
    assert default_output(named, "results") == tmp_path / "x.csv"
