from __future__ import annotations

from pathlib import Path

import pytest

from nestocc import config as config_module
from nestocc.environment import EnvironmentSpec
from nestocc.tree import WeightedTree, materialize_tree


@pytest.fixture
def uniform_sieve() -> EnvironmentSpec:
    return EnvironmentSpec.bernoulli_sieve()


@pytest.fixture
def dirichlet() -> EnvironmentSpec:
    """DirichletSplit(2, 1): two boxes with uniform split, lambda = log 2 - log(1 + theta)."""
    return EnvironmentSpec.dirichlet_split(2, 1.0)


@pytest.fixture
def half_split() -> EnvironmentSpec:
    return EnvironmentSpec.deterministic_split([0.5, 0.5])


@pytest.fixture
def dirichlet_tree(dirichlet: EnvironmentSpec) -> WeightedTree:
    return materialize_tree(dirichlet, 8, seed=7)


@pytest.fixture
def sieve_tree(uniform_sieve: EnvironmentSpec) -> WeightedTree:
    return materialize_tree(uniform_sieve, 4, 1e-5, seed=7)


@pytest.fixture(autouse=True)
def isolate_runtime(
    tmp_path: Path, monkeypatch: pytest.MonkeyPatch
) -> None:
    monkeypatch.setenv("NESTOCC_OUTPUT_DIR", str(tmp_path / "runs"))
    monkeypatch.delenv("NESTOCC_MEMORY_BUDGET_MB", raising=False)
    monkeypatch.delenv("SOURCE_DATE_EPOCH", raising=False)
    monkeypatch.setattr(config_module, "_CONFIG", config_module.Config())
