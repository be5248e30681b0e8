from __future__ import annotations

from pathlib import Path

import pytest

import nestocc
from nestocc.config import BYTES_PER_BOX, get_memory_budget_mb, get_output_dir, max_boxes


def test_configure_updates_global_config() -> None:
    cfg = nestocc.configure(mass_floor=1e-7, k_max=4)
    assert cfg.mass_floor == 1e-7
    assert nestocc.get_config().k_max == 4
    assert nestocc.get_config().root_tol == 1e-10


def test_configure_rejects_unknown_keys() -> None:
    with pytest.raises(TypeError):
        nestocc.configure(not_a_setting=1)


def test_memory_budget_env_override(monkeypatch: pytest.MonkeyPatch) -> None:
    assert get_memory_budget_mb() == 1024.0
    monkeypatch.setenv("NESTOCC_MEMORY_BUDGET_MB", "1")
    assert get_memory_budget_mb() == 1.0
    assert max_boxes() == 1024 * 1024 // BYTES_PER_BOX


def test_output_dir_env_override(tmp_path: Path) -> None:
    assert get_output_dir() == tmp_path / "runs"
