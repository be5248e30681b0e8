"""Configuration management for nestocc.

This module provides a global configuration system for numerical tolerances,
truncation defaults and resource limits.
"""

from __future__ import annotations

import os
from dataclasses import dataclass, replace
from pathlib import Path

from platformdirs import user_cache_dir

PACKAGE_NAME = "nestocc"
BYTES_PER_BOX = 40
"""Storage per materialized box: weight, position, start, parent index, spare."""


@dataclass(frozen=True)
class Config:
    """Global configuration for nestocc package.

    Attributes:
        mass_floor: Default truncation floor for infinite stick-breaking.
        memory_budget_mb: Memory budget for materialized trees, in MiB.
        root_tol: Absolute tolerance of every root search.
        theta_max: Largest theta searched when bracketing roots.
        equality_tol: Tolerance used to detect the equality regimes IIB and III.
        mc_grid_step: Default theta step of Monte Carlo lambda grids.
        mc_samples: Default number of fragmentations per Monte Carlo grid.
        k_max: Default largest k tabulated in occupancy counts.
        small_x_switch: Below this argument the Poisson kernels use series.
        output_dir: Default directory for run outputs.
    """

    mass_floor: float = 1e-9
    memory_budget_mb: float = 1024.0
    root_tol: float = 1e-10
    theta_max: float = 1e3
    equality_tol: float = 1e-9
    mc_grid_step: float = 0.05
    mc_samples: int = 20_000
    k_max: int = 8
    small_x_switch: float = 1e-4
    output_dir: Path = Path(user_cache_dir(PACKAGE_NAME)) / "runs"


_CONFIG = Config()


def get_config() -> Config:
    """Get the current global configuration.

    Returns:
        The current Config instance.
    """
    return _CONFIG


def configure(**kwargs: object) -> Config:
    """Update the global configuration.

    Args:
        **kwargs: Configuration parameters to update (see Config attributes).

    Returns:
        The updated Config instance.

    Example:
        >>> import nestocc
        >>> nestocc.configure(mass_floor=1e-7)
    """
    global _CONFIG  # noqa: PLW0603
    _CONFIG = replace(_CONFIG, **kwargs)  # type: ignore[arg-type]
    return _CONFIG


def get_memory_budget_mb() -> float:
    """Return the tree memory budget, honoring ``NESTOCC_MEMORY_BUDGET_MB``."""
    override = os.getenv("NESTOCC_MEMORY_BUDGET_MB")
    if override:
        return float(override)
    return _CONFIG.memory_budget_mb


def max_boxes() -> int:
    """Return the largest number of boxes a tree may hold under the budget."""
    return int(get_memory_budget_mb() * 1024 * 1024 // BYTES_PER_BOX)


def get_output_dir() -> Path:
    """Return the default output directory, honoring ``NESTOCC_OUTPUT_DIR``."""
    override = os.getenv("NESTOCC_OUTPUT_DIR")
    if override:
        return Path(override).expanduser()
    return _CONFIG.output_dir
