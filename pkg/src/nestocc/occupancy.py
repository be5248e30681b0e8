"""Nested ball allocation and occupancy counts.

Balls are classified simultaneously at every level of the nested partition.
Two allocators sample the same law:

    - throw_balls_tree(): locate uniforms in the intervals of a materialized tree
    - throw_balls_lazy(): split ball counts box by box, expanding only occupied
      boxes (no tree, so W_j and Z_j are unavailable)

Allocations store, per level, only the occupied boxes (sorted by box index)
with the row of their parent in the previous level's table.
"""

from __future__ import annotations

import logging
import math
from dataclasses import dataclass

import numpy as np
from numpy.typing import NDArray
from scipy.stats import chi2_contingency

from .config import get_config
from .environment import EnvironmentSpec
from .exceptions import ConfigurationError, DomainError, MissingBoxCountError
from .kernels import m_kernel, phi, psi, v_kernel
from .rng import BALLS, REPLICA, derive_seed, stream
from .tree import WeightedTree, materialize_tree
from .types import AllocationMode

logger = logging.getLogger(__name__)

IntArray = NDArray[np.int64]
FloatArray = NDArray[np.float64]

OVERFLOW = -1
"""Box index of balls that landed in truncated mass."""


@dataclass(frozen=True)
class LevelCounts:
    """Occupied boxes of one level.

    Attributes:
        box: Box index (tree index in tree-first mode, generation index in
            ball-driven mode), increasing.
        parent: Row of each box's parent in the previous level's table.
        count: Number of balls in each box, all >= 1.
        overflow: Balls that landed in truncated mass at or above this level.
    """

    box: IntArray
    parent: IntArray
    count: IntArray
    overflow: int = 0


@dataclass(frozen=True)
class Allocation:
    """Per-level ball counts of one realization.

    Attributes:
        mode: "tree_first" or "ball_driven".
        balls: Number of balls thrown (n, or N_t when Poissonized).
        levels: Counts for levels 0..J.
        t: Poisson intensity when Poissonized.
        tree: The tree in tree-first mode.
    """

    mode: AllocationMode
    balls: int
    levels: tuple[LevelCounts, ...]
    t: float | None = None
    tree: WeightedTree | None = None

    @property
    def depth(self) -> int:
        """Deepest allocated level."""
        return len(self.levels) - 1

    @property
    def overflow(self) -> int:
        """Balls in truncated mass at the deepest level."""
        return self.levels[-1].overflow


def _root_counts(balls: int) -> LevelCounts:
    if balls == 0:
        empty = np.empty(0, dtype=np.int64)
        return LevelCounts(box=empty, parent=empty, count=empty)
    return LevelCounts(
        box=np.zeros(1, dtype=np.int64),
        parent=np.full(1, -1, dtype=np.int64),
        count=np.full(1, balls, dtype=np.int64),
    )


def locate_balls(tree: WeightedTree, uniforms: FloatArray, depth: int) -> list[IntArray]:
    """Box index of every ball at every level 0..depth (OVERFLOW for truncated mass).

    Each ball is searched among the children of its box at the previous level,
    so the per-level assignments are nested by construction. Intervals are
    half-open [start, start + weight).
    """
    boxes = [np.zeros(uniforms.size, dtype=np.int64)]
    for j in range(1, depth + 1):
        level = tree.level(j)
        prev = boxes[-1]
        current = np.full(uniforms.size, OVERFLOW, dtype=np.int64)
        live = np.flatnonzero(prev != OVERFLOW)
        if live.size and level.size:
            first, counts = level.children_ranges()
            parents = prev[live]
            has_children = counts[parents] > 0
            live, parents = live[has_children], parents[has_children]
            u = uniforms[live]
            lo = first[parents]
            hi = lo + counts[parents] - 1
            idx = np.searchsorted(level.start, u, side="right") - 1
            idx = np.clip(idx, lo, hi)
            if not level.exact:
                beyond = (idx == hi) & (u >= level.start[idx] + level.weight[idx])
                live, idx = live[~beyond], idx[~beyond]
            current[live] = idx
        boxes.append(current)
    return boxes


def _counts_from_boxes(
    tree: WeightedTree, boxes: list[IntArray], balls: int
) -> tuple[LevelCounts, ...]:
    levels = [_root_counts(balls)]
    for j in range(1, len(boxes)):
        assigned = boxes[j]
        inside = assigned[assigned != OVERFLOW]
        box, count = np.unique(inside, return_counts=True)
        parent_box = tree.level(j).parent[box]
        parent_row = np.searchsorted(levels[-1].box, parent_box)
        levels.append(
            LevelCounts(
                box=box.astype(np.int64),
                parent=parent_row.astype(np.int64),
                count=count.astype(np.int64),
                overflow=int(assigned.size - inside.size),
            )
        )
    return tuple(levels)


def throw_balls_tree(
    tree: WeightedTree,
    n: int,
    rng: np.random.Generator,
    *,
    depth: int | None = None,
    uniforms: FloatArray | None = None,
) -> Allocation:
    """Throw n balls into a materialized tree.

    Args:
        tree: Materialized tree.
        n: Number of balls (0 allowed).
        rng: Random stream for the uniforms.
        depth: Deepest level to classify (tree depth when None).
        uniforms: Pre-drawn uniforms to use instead of ``rng``.

    Returns:
        Tree-first allocation; balls in truncated mass are counted as overflow.
    """
    if n < 0:
        raise ConfigurationError(f"Ball count must be nonnegative, got n={n}")
    depth = tree.depth if depth is None else depth
    u = rng.random(n) if uniforms is None else np.asarray(uniforms, dtype=np.float64)[:n]
    boxes = locate_balls(tree, u, depth)
    alloc = Allocation(
        mode="tree_first", balls=n, levels=_counts_from_boxes(tree, boxes, n), tree=tree
    )
    if alloc.overflow:
        logger.debug("%d of %d balls landed in truncated mass", alloc.overflow, n)
    return alloc


def _split_sieve(
    env: EnvironmentSpec, counts: IntArray, rng: np.random.Generator
) -> tuple[IntArray, IntArray]:
    """Split ball counts by stick-breaking until every ball is placed."""
    remaining = counts.copy()
    active = np.flatnonzero(remaining > 0)
    parents: list[IntArray] = []
    placed: list[IntArray] = []
    rounds: list[IntArray] = []
    r = 0
    while active.size:
        w = env.stick_law.sample(rng, active.size)
        k = rng.binomial(remaining[active], 1.0 - w)
        remaining[active] -= k
        hit = k > 0
        parents.append(active[hit])
        placed.append(k[hit])
        rounds.append(np.full(int(hit.sum()), r, dtype=np.int64))
        active = active[remaining[active] > 0]
        r += 1
    if not parents:
        empty = np.empty(0, dtype=np.int64)
        return empty, empty
    parent = np.concatenate(parents)
    count = np.concatenate(placed).astype(np.int64)
    order = np.lexsort((np.concatenate(rounds), parent))
    return parent[order], count[order]


def _split_finite(
    env: EnvironmentSpec, counts: IntArray, rng: np.random.Generator
) -> tuple[IntArray, IntArray]:
    """Split ball counts over finite fragmentations by sequential binomials."""
    n_boxes = counts.size
    if env.kind == "dirichlet_split":
        probs = rng.dirichlet(np.full(env.m, env.alpha), size=n_boxes)
    else:
        probs = np.tile(np.asarray(env.weights, dtype=np.float64), (n_boxes, 1))
    width = probs.shape[1]
    result = np.zeros((n_boxes, width), dtype=np.int64)
    remaining = counts.copy()
    left = np.ones(n_boxes)
    for col in range(width - 1):
        share = np.clip(np.divide(probs[:, col], left, out=np.zeros(n_boxes), where=left > 0), 0, 1)
        k = rng.binomial(remaining, share)
        result[:, col] = k
        remaining -= k
        left -= probs[:, col]
    result[:, -1] = remaining
    parent = np.repeat(np.arange(n_boxes, dtype=np.int64), width)
    flat = result.reshape(-1)
    hit = flat > 0
    return parent[hit], flat[hit]


def throw_balls_lazy(
    env: EnvironmentSpec, n: int, J: int, rng: np.random.Generator
) -> Allocation:
    """Allocate n balls down to level J expanding only occupied boxes.

    Each occupied box with c balls draws its fragmentation and splits the c
    balls by sequential binomials; stick-breaking stops as soon as all c balls
    are placed, so no truncation occurs.

    Args:
        env: Environment.
        n: Number of balls (0 allowed).
        J: Deepest level.
        rng: Random stream.

    Returns:
        Ball-driven allocation; box indices are generation indices.
    """
    if n < 0 or J < 1:
        raise ConfigurationError(f"Need n >= 0 and J >= 1, got n={n}, J={J}")
    split = _split_finite if env.finite_offspring else _split_sieve
    levels = [_root_counts(n)]
    for _ in range(J):
        parent, count = split(env, levels[-1].count, rng)
        levels.append(
            LevelCounts(box=np.arange(count.size, dtype=np.int64), parent=parent, count=count)
        )
    return Allocation(mode="ball_driven", balls=n, levels=tuple(levels))


def poissonize(
    source: WeightedTree | EnvironmentSpec,
    t: float,
    rng: np.random.Generator,
    *,
    J: int | None = None,
) -> Allocation:
    """Allocate N_t ~ Poisson(t) balls.

    Args:
        source: A tree (tree-first allocation) or an environment (ball-driven).
        t: Positive intensity.
        rng: Random stream; the Poisson draw comes first.
        J: Depth for ball-driven allocation (tree depth when a tree is given).

    Returns:
        Allocation with ``t`` recorded and ``balls`` = N_t.
    """
    if not t > 0:
        raise DomainError(f"Poisson intensity must be positive, got t={t!r}")
    count = int(rng.poisson(t))
    if isinstance(source, WeightedTree):
        alloc = throw_balls_tree(source, count, rng, depth=J)
    else:
        if J is None:
            raise ConfigurationError("Ball-driven Poissonization needs a depth J")
        alloc = throw_balls_lazy(source, count, J, rng)
    return Allocation(mode=alloc.mode, balls=count, levels=alloc.levels, t=t, tree=alloc.tree)


@dataclass(frozen=True)
class OccupancyCounts:
    """Occupancy statistics of one level.

    Attributes:
        j: Level.
        K: K(k), the number of boxes with at least k balls, for k = 1..k_max.
        excess: Balls beyond the k_max-th in each box, summed, so that
            sum(K.values()) + excess equals the number of placed balls.
        L: Empty boxes Z - K(1), when Z is exact.
        Z: Available boxes, when exact.
        overflow: Balls in truncated mass.
    """

    j: int
    K: dict[int, int]
    excess: int
    L: int | None = None
    Z: int | None = None
    overflow: int = 0

    def placed_balls(self) -> int:
        """Number of balls in boxes, recovered from the K(k) table."""
        return sum(self.K.values()) + self.excess


def occupancy_counts(
    alloc: Allocation,
    j: int,
    k_max: int | None = None,
    tree: WeightedTree | None = None,
    *,
    with_empty: bool = False,
) -> OccupancyCounts:
    """Compute K(k) for k = 1..k_max, and L and Z when the level is exact.

    Args:
        alloc: Allocation.
        j: Level.
        k_max: Largest tabulated k (config default when None).
        tree: Tree providing Z_j (defaults to the allocation's own tree).
        with_empty: Require the empty-box count L.

    Raises:
        DomainError: If j is beyond the allocation depth.
        MissingBoxCountError: If L is required but Z_j is not exactly known.
    """
    if not 0 <= j <= alloc.depth:
        raise DomainError(f"Level j={j} not allocated (depth {alloc.depth})")
    k_max = k_max or get_config().k_max
    counts = alloc.levels[j].count
    K = {k: int(np.count_nonzero(counts >= k)) for k in range(1, k_max + 1)}
    excess = int(np.maximum(counts - k_max, 0).sum())
    tree = tree or alloc.tree
    Z: int | None = None
    L: int | None = None
    if tree is not None and j <= tree.depth and tree.level(j).exact:
        Z = tree.level(j).size
        L = Z - K[1]
    elif with_empty:
        reason = "no tree is available" if tree is None else "the level is truncated"
        raise MissingBoxCountError(
            f"Empty-box count L at level {j} needs an exact Z_j, but {reason}"
        )
    return OccupancyCounts(j=j, K=K, excess=excess, L=L, Z=Z, overflow=alloc.levels[j].overflow)


@dataclass(frozen=True)
class ConditionalMoments:
    """Quenched moments of a Poissonized level.

    Attributes:
        mean: E[K_t(k) | tree] = sum phi_k(t e^{-V(u)}).
        variance: Var[K_t(k) | tree] = sum phi_k (1 - phi_k).
        deficit_mean: E[N_t - K_t | tree] = sum m(t e^{-V(u)}).
        deficit_variance: Var[N_t - K_t | tree] = sum v(t e^{-V(u)}).
    """

    mean: float
    variance: float
    deficit_mean: float
    deficit_variance: float


def conditional_moments(tree: WeightedTree, t: float, j: int, k: int = 1) -> ConditionalMoments:
    """Exact quenched moments of K_t(k) and of the deficit at level j."""
    if t < 0:
        raise DomainError(f"Poisson intensity must be nonnegative, got t={t!r}")
    x = t * tree.level(j).weight
    p = phi(x, k)
    return ConditionalMoments(
        mean=float(p.sum()),
        variance=float((p * (1.0 - p)).sum()),
        deficit_mean=float(m_kernel(x).sum()),
        deficit_variance=float(v_kernel(x).sum()),
    )


def conditional_covariance(tree: WeightedTree, t: float, j: int, l: int, k: int) -> float:  # noqa: E741
    """Finite-level quenched covariance sum of psi_{l,k}(t e^{-V(u)}) over level j."""
    return float(psi(t * tree.level(j).weight, l, k).sum())


@dataclass(frozen=True)
class SandwichResult:
    """Depoissonization bracket on one coupled ball sequence.

    Attributes:
        n: Deterministic ball count.
        delta: Relative half-width of the Poisson window.
        j: Level.
        n_lower: N_{(1-delta)n}.
        n_upper: N_{(1+delta)n}.
        lower: Deficit from the first n_lower balls.
        observed: Deficit n - K_n.
        upper: Deficit from the first n_upper balls.
        bracketed: Whether n_lower <= n <= n_upper.
        holds: Whether lower <= observed <= upper.
    """

    n: int
    delta: float
    j: int
    n_lower: int
    n_upper: int
    lower: int
    observed: int
    upper: int
    bracketed: bool
    holds: bool


def depoissonization_sandwich(
    tree: WeightedTree, n: int, delta: float, j: int, rng: np.random.Generator
) -> SandwichResult:
    """Compare the deficit of n balls with Poissonized deficits around n.

    N_{(1+delta)n} is drawn first and thinned binomially to N_{(1-delta)n}, so
    the two Poisson counts are coupled and ordered. All three deficits are read
    off prefixes of one ball sequence; since the deficit of a prefix is
    nondecreasing in its length, the bracket holds whenever the counts are
    ordered around n.
    """
    if not 0 < delta < 1:
        raise DomainError(f"delta must lie in (0, 1), got {delta!r}")
    n_upper = int(rng.poisson((1.0 + delta) * n))
    n_lower = int(rng.binomial(n_upper, (1.0 - delta) / (1.0 + delta)))
    u = rng.random(max(n, n_upper))
    boxes = locate_balls(tree, u, j)[j]

    def deficit(m: int) -> int:
        prefix = boxes[:m]
        occupied = np.unique(prefix[prefix != OVERFLOW]).size
        return m - occupied

    lower, observed, upper = deficit(n_lower), deficit(n), deficit(n_upper)
    return SandwichResult(
        n=n,
        delta=delta,
        j=j,
        n_lower=n_lower,
        n_upper=n_upper,
        lower=lower,
        observed=observed,
        upper=upper,
        bracketed=n_lower <= n <= n_upper,
        holds=lower <= observed <= upper,
    )


@dataclass(frozen=True)
class ChiSquareResult:
    """Two-sample chi-square homogeneity test of K(k) laws.

    Attributes:
        statistic: Pearson statistic.
        dof: Degrees of freedom.
        p_value: Upper tail probability.
        values: Pooled support values of K(k) (last bin collects the rest).
        tree_counts: Frequencies under tree-first allocation.
        lazy_counts: Frequencies under ball-driven allocation.
    """

    statistic: float
    dof: int
    p_value: float
    values: tuple[int, ...]
    tree_counts: tuple[int, ...]
    lazy_counts: tuple[int, ...]


def _pool_sparse(table: NDArray[np.int64], min_expected: float = 5.0) -> NDArray[np.int64]:
    """Merge adjacent columns until every expected cell count reaches min_expected."""
    columns = [table[:, i].copy() for i in range(table.shape[1])]
    total = table.sum()
    row_share = table.sum(axis=1) / total
    pooled: list[NDArray[np.int64]] = []
    acc = np.zeros(table.shape[0], dtype=np.int64)
    for col in columns:
        acc = acc + col
        if (row_share * acc.sum()).min() >= min_expected:
            pooled.append(acc)
            acc = np.zeros(table.shape[0], dtype=np.int64)
    if acc.sum():
        if pooled:
            pooled[-1] = pooled[-1] + acc
        else:
            pooled.append(acc)
    return np.stack(pooled, axis=1)


def compare_allocators(
    env: EnvironmentSpec,
    n: int,
    j: int,
    replicas: int,
    seed: int = 0,
    *,
    k: int = 1,
) -> ChiSquareResult:
    """Test that tree-first and ball-driven allocation give the same law of K_n^{(j)}(k).

    Each replica draws a fresh tree (tree-first) or fresh fragmentations
    (ball-driven) from independent derived streams.
    """
    tree_values = np.empty(replicas, dtype=np.int64)
    lazy_values = np.empty(replicas, dtype=np.int64)
    for r in range(replicas):
        replica_seed = derive_seed(seed, REPLICA, r)
        tree = materialize_tree(env, j, seed=replica_seed)
        alloc = throw_balls_tree(tree, n, stream(replica_seed, BALLS, 0))
        tree_values[r] = int(np.count_nonzero(alloc.levels[j].count >= k))
        lazy = throw_balls_lazy(env, n, j, stream(replica_seed, BALLS, 1))
        lazy_values[r] = int(np.count_nonzero(lazy.levels[j].count >= k))
    low = min(int(tree_values.min()), int(lazy_values.min()))
    high = max(int(tree_values.max()), int(lazy_values.max()))
    support = np.arange(low, high + 1)
    table = np.stack(
        [
            np.array([np.count_nonzero(tree_values == s) for s in support], dtype=np.int64),
            np.array([np.count_nonzero(lazy_values == s) for s in support], dtype=np.int64),
        ]
    )
    observed = table[:, table.sum(axis=0) > 0]
    values = tuple(int(s) for s in support[table.sum(axis=0) > 0])
    pooled = _pool_sparse(observed)
    if pooled.shape[1] < 2:
        statistic, p_value, dof = 0.0, 1.0, 0
    else:
        res = chi2_contingency(pooled, correction=False)
        statistic, p_value, dof = float(res[0]), float(res[1]), int(res[2])
    logger.info("Allocator chi-square: stat=%.4g dof=%d p=%.4g", statistic, dof, p_value)
    return ChiSquareResult(
        statistic=statistic,
        dof=dof,
        p_value=p_value if math.isfinite(p_value) else 1.0,
        values=values,
        tree_counts=tuple(int(c) for c in observed[0]),
        lazy_counts=tuple(int(c) for c in observed[1]),
    )
