"""Materialized weighted branching process.

Level j holds the boxes u with |u| = j as flat arrays: the parent index in
level j - 1, the weight P(u), the position V(u) = -log P(u) and the left end
of the interval I_u. Intervals of the children of u tile I_u from its left
end in generation order; any truncated mass of u sits at the right end of
I_u and belongs to no box.

Each level is sampled from its own stream ``stream(seed, TREE, j)``, so a
tree grown to depth J and then extended to J' has exactly the same first J
levels as a tree built directly to J'.
"""

from __future__ import annotations

import logging
import math
from dataclasses import dataclass, field

import numpy as np
from numpy.typing import NDArray
from scipy.special import logsumexp

from ._internal.validation import check_tree_conservation
from .config import get_config, max_boxes
from .environment import EnvironmentSpec, sample_level
from .exceptions import ConfigurationError, DomainError, MemoryBudgetError
from .rng import TREE, stream
from .spectral import SpectralProfile, build_profile

logger = logging.getLogger(__name__)

FloatArray = NDArray[np.float64]
IntArray = NDArray[np.int64]


@dataclass(frozen=True)
class TreeLevel:
    """One level of a weighted tree.

    Attributes:
        parent: Index of each box's parent in the previous level.
        weight: P(u) of each box.
        position: V(u) = -log P(u).
        start: Left end of each box's interval, nondecreasing.
        residual_mass: Total truncated mass at this level, 1 - sum(weight).
        parent_loss: Absolute mass each box of the previous level lost to
            truncation when it was expanded (empty at the root).
    """

    parent: IntArray
    weight: FloatArray
    position: FloatArray
    start: FloatArray
    residual_mass: float
    parent_loss: FloatArray = field(default_factory=lambda: np.empty(0))

    @property
    def size(self) -> int:
        """Number of boxes Z_j at this level."""
        return int(self.weight.size)

    @property
    def exact(self) -> bool:
        """Whether no mass has been truncated down to this level."""
        return self.residual_mass == 0.0

    def children_ranges(self) -> tuple[IntArray, IntArray]:
        """Return (first child index, child count) for every box of the previous level.

        Only meaningful when the previous level's size is known to the caller;
        the arrays have length ``parent_loss.size``.
        """
        counts = np.bincount(self.parent, minlength=self.parent_loss.size).astype(np.int64)
        first = np.cumsum(counts) - counts
        return first, counts


def _root_level() -> TreeLevel:
    return TreeLevel(
        parent=np.full(1, -1, dtype=np.int64),
        weight=np.ones(1),
        position=np.zeros(1),
        start=np.zeros(1),
        residual_mass=0.0,
    )


@dataclass(frozen=True)
class WeightedTree:
    """Levels 0..J of a weighted branching process.

    Attributes:
        env: Environment the tree was sampled from.
        mass_floor: Absolute truncation floor used for infinite fragmentations.
        seed: Master seed; level j was drawn from ``stream(seed, TREE, j)``.
        levels: Level records, ``levels[0]`` being the root.
    """

    env: EnvironmentSpec
    mass_floor: float
    seed: int
    levels: tuple[TreeLevel, ...]

    @property
    def depth(self) -> int:
        """Deepest materialized level J."""
        return len(self.levels) - 1

    @property
    def total_boxes(self) -> int:
        """Number of boxes over all levels."""
        return sum(level.size for level in self.levels)

    def level(self, j: int) -> TreeLevel:
        """Return level j."""
        if not 0 <= j <= self.depth:
            raise DomainError(f"Level j={j} not materialized (depth {self.depth})")
        return self.levels[j]

    def deepest_exact_level(self) -> int:
        """Deepest level with no truncated mass (0 when every level is truncated)."""
        exact = [j for j, level in enumerate(self.levels) if level.exact]
        return exact[-1]


def estimated_boxes(env: EnvironmentSpec, J: int) -> float:
    """Expected number of boxes over levels 0..J for finite-offspring environments."""
    mean = env.mean_offspring
    if not math.isfinite(mean):
        return math.nan
    return float(sum(mean**j for j in range(J + 1)))


def _grow(
    env: EnvironmentSpec, previous: TreeLevel, mass_floor: float, rng: np.random.Generator
) -> TreeLevel:
    sample = sample_level(env, previous.weight, mass_floor, rng)
    parent = sample.parent
    parent_w = previous.weight[parent]
    weight = parent_w * sample.probs
    # Relative offsets of each child inside its parent's interval.
    cum = np.cumsum(sample.probs)
    first, counts = np.unique(parent, return_index=True, return_counts=True)[1:]
    base = np.repeat(cum[first] - sample.probs[first], counts) if parent.size else cum
    offset = cum - sample.probs - base
    start = np.maximum.accumulate(previous.start[parent] + parent_w * offset)
    parent_loss = previous.weight * sample.residual
    residual = previous.residual_mass + math.fsum(parent_loss.tolist())
    if env.finite_offspring:
        residual = 0.0
    return TreeLevel(
        parent=parent,
        weight=weight,
        position=-np.log(weight),
        start=start,
        residual_mass=residual,
        parent_loss=parent_loss,
    )


def extend_tree(tree: WeightedTree, J: int) -> WeightedTree:
    """Grow a tree to depth J, keeping its existing levels unchanged.

    Level j is always drawn from ``stream(seed, TREE, j)``, so growing a tree
    reproduces every level it already has. The stream is per level, not per
    box: one level's draws are consumed in box order, so a box's children
    depend on how many boxes precede it. Refining the tree in some other way
    (a different mass floor, say) is therefore not prefix-stable box by box.

    Args:
        tree: Tree to extend.
        J: New depth, at least the current depth.

    Returns:
        A tree with levels 0..J.

    Raises:
        MemoryBudgetError: If the tree would exceed the configured memory budget.
    """
    if J < tree.depth:
        raise ConfigurationError(f"Cannot extend a depth-{tree.depth} tree to J={J}")
    budget = max_boxes()
    estimate = estimated_boxes(tree.env, J)
    if math.isfinite(estimate) and estimate > budget:
        raise MemoryBudgetError(estimate, budget)
    levels = list(tree.levels)
    total = tree.total_boxes
    for j in range(tree.depth + 1, J + 1):
        level = _grow(tree.env, levels[-1], tree.mass_floor, stream(tree.seed, TREE, j))
        total += level.size
        if total > budget:
            raise MemoryBudgetError(total, budget)
        check_tree_conservation(level, j)
        levels.append(level)
        logger.debug(
            "Level %d: %d boxes, residual mass %.3g", j, level.size, level.residual_mass
        )
    return WeightedTree(env=tree.env, mass_floor=tree.mass_floor, seed=tree.seed, levels=tuple(levels))


def materialize_tree(
    env: EnvironmentSpec, J: int, mass_floor: float | None = None, *, seed: int = 0
) -> WeightedTree:
    """Materialize levels 0..J of the weighted branching process.

    Args:
        env: Environment.
        J: Deepest level, at least 1.
        mass_floor: Absolute truncation floor (config default when None). A box
            stops generating sticks once its unexpanded mass drops below the
            floor; boxes lighter than the floor are not expanded.
        seed: Master seed.

    Returns:
        The materialized tree.

    Raises:
        ConfigurationError: If J < 1 or an infinite environment has a zero floor.
        MemoryBudgetError: If the estimated or reached box count exceeds the budget.

    Example:
        >>> tree = materialize_tree(EnvironmentSpec.deterministic_split([0.5, 0.5]), 3)
        >>> tree.level(3).size
        8
    """
    if J < 1:
        raise ConfigurationError(f"Tree depth must be at least 1, got J={J}")
    floor = get_config().mass_floor if mass_floor is None else mass_floor
    if not env.finite_offspring and not 0.0 < floor < 1.0:
        raise ConfigurationError(
            f"Infinite-offspring environment needs 0 < mass_floor < 1, got {floor!r}"
        )
    root = WeightedTree(env=env, mass_floor=floor, seed=seed, levels=(_root_level(),))
    return extend_tree(root, J)


@dataclass(frozen=True)
class MartingaleValue:
    """W_j(theta) with its truncation flag.

    Attributes:
        value: sum over |u| = j of exp(-theta V(u) - lambda(theta) j).
        approximate: True when mass was truncated and theta < 1, where the
            truncation error has no pathwise bound.
    """

    value: float
    approximate: bool


def martingale(
    tree: WeightedTree, theta: float, j: int, profile: SpectralProfile | None = None
) -> MartingaleValue:
    """Additive martingale W_j(theta) on a materialized level.

    Args:
        tree: Materialized tree.
        theta: Exponent in the domain of lambda.
        j: Level.
        profile: Spectral profile of the tree's environment (built when None).

    Returns:
        The value, computed in log-space, and its approximate flag.
    """
    level = tree.level(j)
    profile = profile or build_profile(tree.env)
    log_value = float(logsumexp(-theta * level.position)) - profile.lambda_(theta) * j
    return MartingaleValue(
        value=math.exp(log_value), approximate=(not level.exact) and theta < 1.0
    )


@dataclass(frozen=True)
class LevelStats:
    """Summary statistics of one tree level.

    Attributes:
        j: Level index.
        Z: Number of available boxes.
        Z_exact: Whether Z is exact (no truncated mass down to this level).
        W: W_j(theta) per requested theta.
        W_approximate: Approximate flag per requested theta.
        min_V: Minimal position, the leftmost particle of the walk.
    """

    j: int
    Z: int
    Z_exact: bool
    W: dict[float, float]
    W_approximate: dict[float, bool]
    min_V: float


def level_stats(
    tree: WeightedTree,
    j: int,
    thetas: tuple[float, ...] | list[float] = (1.0,),
    profile: SpectralProfile | None = None,
) -> LevelStats:
    """Aggregate Z_j, W_j(theta) and min V(u) for level j."""
    level = tree.level(j)
    profile = profile or build_profile(tree.env)
    values = {float(theta): martingale(tree, theta, j, profile) for theta in thetas}
    return LevelStats(
        j=j,
        Z=level.size,
        Z_exact=level.exact,
        W={theta: mv.value for theta, mv in values.items()},
        W_approximate={theta: mv.approximate for theta, mv in values.items()},
        min_V=float(level.position.min()) if level.size else math.inf,
    )
