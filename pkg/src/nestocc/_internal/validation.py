"""Validation utilities for invariant checks.

This module provides functions for validating result tables and the exact
identities every tree and allocation must satisfy.
"""

from __future__ import annotations

import math
from typing import TYPE_CHECKING

import numpy as np
import polars as pl

if TYPE_CHECKING:
    from ..occupancy import Allocation
    from ..tree import TreeLevel

CONSERVATION_TOL = 1e-9


def validate_schema(df: pl.DataFrame, required_columns: list[str]) -> None:
    """Validate that a DataFrame has the required columns.

    Args:
        df: DataFrame to validate.
        required_columns: Required column names.

    Raises:
        ValueError: If required columns are missing.
    """
    missing = [col for col in required_columns if col not in df.columns]
    if missing:
        raise ValueError(f"Missing required columns: {missing}")


def validate_no_duplicates(df: pl.DataFrame, keys: list[str]) -> None:
    """Validate that there are no duplicate rows based on key columns.

    Args:
        df: DataFrame to validate.
        keys: Column names that define uniqueness, e.g. (replica, n_or_t, j, k).

    Raises:
        ValueError: If duplicate rows are found.
    """
    dups = df.group_by(keys).agg(pl.len().alias("count")).filter(pl.col("count") > 1)
    if dups.height > 0:
        raise ValueError(
            f"Found {dups.height} duplicate rows. First few duplicates:\n{dups.head(5)}"
        )


def check_tree_conservation(level: TreeLevel, j: int, tol: float = CONSERVATION_TOL) -> None:
    """Check sum of weights plus truncated mass equals one on a level.

    Raises:
        ValueError: If conservation fails beyond ``tol``.
    """
    total = math.fsum(level.weight.tolist()) + level.residual_mass
    if abs(total - 1.0) > tol:
        raise ValueError(
            f"Level {j} does not conserve mass: sum(weights) + residual = {total!r}"
        )


def check_allocation(alloc: Allocation) -> None:
    """Check ball conservation and parent-child consistency of an allocation.

    Every ball is either in exactly one box or in the overflow box of each
    level, and every box's count is the sum of its children's counts plus the
    balls its children lost to overflow.

    Raises:
        ValueError: If an identity fails.
    """
    total = alloc.balls
    for j, level in enumerate(alloc.levels):
        placed = int(level.count.sum()) + level.overflow
        if placed != total:
            raise ValueError(f"Level {j}: {placed} balls placed, expected {total}")
        if j == 0:
            continue
        previous = alloc.levels[j - 1]
        by_parent = np.bincount(level.parent, weights=level.count, minlength=previous.count.size)
        lost = previous.count - by_parent.astype(np.int64)
        if np.any(lost < 0) or int(lost.sum()) != level.overflow - previous.overflow:
            raise ValueError(f"Level {j}: children counts inconsistent with parent counts")
