"""Config-driven experiment runner.

An experiment config is a TOML file with one level of named sections:

    [environment]   kind and parameters of the random environment
    [spectral]      Monte Carlo grid overrides (optional)
    [run]           allocation mode, ball counts or intensities, level rule
                    or explicit levels, depth, replicas and seeds
    [verify]        Gibbs-measure limit checks (optional)
    [output]        CSV path (optional)

Replicas run in a process pool. Replica r is fully determined by
``derive_seed(master_seed, REPLICA, r)`` and rows are collected in
replica-major order, so the output does not depend on the worker count.
"""

from __future__ import annotations

import json
import logging
import math
import sys
from collections.abc import Iterable, Mapping, Sequence
from dataclasses import dataclass, field, replace
from functools import lru_cache
from multiprocessing import Pool
from pathlib import Path
from typing import Any, get_args

import numpy as np
import polars as pl

from ._internal.validation import check_allocation, validate_no_duplicates
from .config import get_output_dir, max_boxes
from .environment import EnvironmentSpec
from .exceptions import (
    ConfigurationError,
    InadmissibleRegimeError,
    LatticeEnvironmentError,
    MemoryBudgetError,
    NestoccError,
    NoThetaStarError,
)
from .local_limit import Discrepancy, check_clt_tail, check_local_limit, check_renewal_sum
from .occupancy import (
    Allocation,
    OccupancyCounts,
    occupancy_counts,
    poissonize,
    throw_balls_lazy,
    throw_balls_tree,
)
from .predictions import (
    PredictionInput,
    compare,
    estimate_w_hat,
    level_for,
    observed_quantity,
    predict,
    predict_poissonized,
    prediction_thetas,
    realized_offset,
)
from .rng import BALLS, REPLICA, derive_seed, stream
from .spectral import (
    CriticalConstants,
    MonteCarloConfig,
    SpectralProfile,
    alpha_exponent,
    build_profile,
    classify_regime,
    critical_constants,
    legendre,
    solve_theta_for_slope,
)
from .tree import WeightedTree, estimated_boxes, level_stats, materialize_tree
from .types import AllocationMode, RegimeLabel, RenewalKernel, TailMode, VerifyCheck

if sys.version_info >= (3, 11):
    import tomllib
else:  # pragma: no cover
    import tomli as tomllib

logger = logging.getLogger(__name__)

RESULT_COLUMNS = [
    "replica",
    "n_or_t",
    "j",
    "k",
    "K",
    "L",
    "Z",
    "W_theta_json",
    "predicted",
    "relative_error",
    "overflow_balls",
]


ROW_KEYS = ["replica", "n_or_t", "j", "k"]
"""Columns identifying one result row."""

RESULT_SCHEMA: dict[str, Any] = {
    "replica": pl.Int64,
    "n_or_t": pl.Float64,
    "j": pl.Int64,
    "k": pl.Int64,
    "K": pl.Int64,
    "L": pl.Int64,
    "Z": pl.Int64,
    "W_theta_json": pl.Utf8,
    "predicted": pl.Float64,
    "relative_error": pl.Float64,
    "overflow_balls": pl.Int64,
}

_VERIFY_CHECKS = get_args(VerifyCheck)


@dataclass(frozen=True)
class LevelRule:
    """Level choice j_n = round-half-up((log n - b sqrt(log n)) / a)."""

    a: float
    b: float = 0.0
    k: int = 1


@dataclass(frozen=True)
class RunSection:
    """The ``[run]`` section.

    Attributes:
        mode: Allocation mode.
        sizes: Ball counts n, or Poisson intensities t when ``poissonized``.
        poissonized: Whether ``sizes`` came from ``t_list``.
        level_rule: Level rule, or None when ``j_list`` is given.
        j_list: Explicit levels (empty when a level rule is used).
        J_max: Depth of trees and allocations (deepest requested level when None).
        mass_floor: Truncation floor (config default when None).
        replicas: Number of independent replicas.
        master_seed: Master seed.
        thetas: theta values at which W_j(theta) is recorded.
        k_list: Thresholds k reported as rows (1 and the rule's k are always included).
        regime: Regime forced for predictions (classified from a when None).
    """

    mode: AllocationMode
    sizes: tuple[float, ...]
    poissonized: bool = False
    level_rule: LevelRule | None = None
    j_list: tuple[int, ...] = ()
    J_max: int | None = None
    mass_floor: float | None = None
    replicas: int = 1
    master_seed: int = 0
    thetas: tuple[float, ...] = (1.0,)
    k_list: tuple[int, ...] = (1,)
    regime: RegimeLabel | None = None

    def levels_for(self, size: float) -> tuple[int, ...]:
        """Levels evaluated for ball count (or intensity) ``size``."""
        if self.level_rule is None:
            return self.j_list
        return (level_for(size, self.level_rule.a, self.level_rule.b),)

    def depth(self) -> int:
        """Depth every replica materializes."""
        deepest = max(max(self.levels_for(size)) for size in self.sizes)
        return self.J_max if self.J_max is not None else max(deepest, 1)

    def report_ks(self) -> tuple[int, ...]:
        """Sorted thresholds reported as rows."""
        ks = {1, *self.k_list}
        if self.level_rule is not None:
            ks.add(self.level_rule.k)
        return tuple(sorted(ks))


@dataclass(frozen=True)
class VerifySection:
    """The ``[verify]`` section: one Gibbs-measure limit check over seeds and levels."""

    check: VerifyCheck
    theta: float
    j_list: tuple[int, ...]
    seeds: int = 10
    master_seed: int = 0
    mass_floor: float | None = None
    h_grid: tuple[float, ...] = (0.5,)
    x_grid: tuple[float, ...] = (0.0,)
    y_grid: tuple[float, ...] = (0.0,)
    kernel: RenewalKernel = "indicator"
    k: int = 1
    mode: TailMode = "corollary"
    delta: float | None = None


@dataclass(frozen=True)
class ExperimentConfig:
    """A parsed experiment config."""

    environment: EnvironmentSpec
    run: RunSection | None = None
    spectral: MonteCarloConfig | None = None
    prefer_closed_form: bool = True
    verify: VerifySection | None = None
    output: Path | None = None
    source: Path | None = None

    def with_seed(self, seed: int) -> ExperimentConfig:
        """Return a copy whose run and verify sections use ``seed``."""
        run = replace(self.run, master_seed=seed) if self.run else None
        verify = replace(self.verify, master_seed=seed) if self.verify else None
        return replace(self, run=run, verify=verify)


@dataclass(frozen=True)
class ExperimentResult:
    """Rows, per-(n_or_t, j, k) summary and run metadata.

    Attributes:
        rows: One row per (replica, n_or_t, j, k) in replica-major order.
        summary: Medians and quartiles across replicas.
        realized_levels: (n_or_t, j, realized offset) for every evaluated level.
        failed_replicas: Indices of replicas that raised.
        acceptance_grade: Whether no ball fell into truncated mass.
    """

    rows: pl.DataFrame
    summary: pl.DataFrame
    realized_levels: tuple[tuple[float, int, float | None], ...]
    failed_replicas: tuple[int, ...] = ()
    acceptance_grade: bool = True
    regime: tuple[RegimeLabel, ...] = field(default=())


def _missing(section: Mapping[str, Any], keys: Iterable[str]) -> list[str]:
    return [key for key in keys if key not in section]


def _float_tuple(values: Any, key: str) -> tuple[float, ...]:
    if not isinstance(values, list | tuple) or not values:
        raise ConfigurationError(f"{key} must be a nonempty list, got {values!r}")
    return tuple(float(v) for v in values)


def _parse_run(section: Mapping[str, Any]) -> RunSection:
    problems: list[str] = []
    mode = section.get("mode", "tree_first")
    if mode not in get_args(AllocationMode):
        problems.append("run.mode")
    has_n, has_t = "n_list" in section, "t_list" in section
    if has_n == has_t:
        problems.append("run.n_list|t_list")
    has_rule, has_j = "a" in section, "j_list" in section
    if has_rule == has_j:
        problems.append("run.a|j_list")
    if has_rule and not float(section["a"]) > 0:
        problems.append("run.a")
    replicas = int(section.get("replicas", 1))
    if replicas < 1:
        problems.append("run.replicas")
    regime = section.get("regime")
    if regime is not None and regime not in get_args(RegimeLabel):
        problems.append("run.regime")
    if problems:
        raise ConfigurationError(f"Invalid or missing keys: {sorted(problems)}")

    sizes = _float_tuple(section["n_list" if has_n else "t_list"], "run.n_list")
    if len(set(sizes)) != len(sizes):
        raise ConfigurationError(f"run.n_list|t_list must not repeat values, got {list(sizes)}")
    if has_n and any(n != math.floor(n) or n < 1 for n in sizes):
        raise ConfigurationError(f"run.n_list must hold positive integers, got {list(sizes)}")
    rule = (
        LevelRule(
            a=float(section["a"]), b=float(section.get("b", 0.0)), k=int(section.get("k", 1))
        )
        if has_rule
        else None
    )
    run = RunSection(
        mode=mode,
        sizes=sizes,
        poissonized=has_t,
        level_rule=rule,
        j_list=tuple(sorted({int(j) for j in section.get("j_list", ())})),
        J_max=int(section["J_max"]) if "J_max" in section else None,
        mass_floor=float(section["mass_floor"]) if "mass_floor" in section else None,
        replicas=replicas,
        master_seed=int(section.get("master_seed", 0)),
        thetas=tuple(float(t) for t in section.get("thetas", (1.0,))),
        k_list=tuple(int(k) for k in section.get("k_list", (1,))),
        regime=regime,
    )
    deepest = max(max(run.levels_for(size)) for size in sizes)
    if run.J_max is not None and run.J_max < deepest:
        raise ConfigurationError(
            f"run.J_max={run.J_max} is below the deepest requested level {deepest}"
        )
    return run


def _parse_verify(section: Mapping[str, Any]) -> VerifySection:
    missing = _missing(section, ("check", "theta", "j_list"))
    if missing:
        raise ConfigurationError(f"[verify] missing keys: {sorted(missing)}")
    check = section["check"]
    if check not in _VERIFY_CHECKS:
        raise ConfigurationError(f"[verify] unknown check: {check!r}")
    kernel = section.get("kernel", "indicator")
    if kernel not in get_args(RenewalKernel):
        raise ConfigurationError(f"[verify] unknown kernel: {kernel!r}")
    mode = section.get("mode", "corollary")
    if mode not in get_args(TailMode):
        raise ConfigurationError(f"[verify] unknown mode: {mode!r}")
    return VerifySection(
        check=check,
        theta=float(section["theta"]),
        j_list=tuple(int(j) for j in section["j_list"]),
        seeds=int(section.get("seeds", 10)),
        master_seed=int(section.get("master_seed", 0)),
        mass_floor=float(section["mass_floor"]) if "mass_floor" in section else None,
        h_grid=tuple(float(h) for h in section.get("h_grid", (0.5,))),
        x_grid=tuple(float(x) for x in section.get("x_grid", (0.0,))),
        y_grid=tuple(float(y) for y in section.get("y_grid", (0.0,))),
        kernel=kernel,
        k=int(section.get("k", 1)),
        mode=mode,
        delta=float(section["delta"]) if "delta" in section else None,
    )


def parse_config(data: Mapping[str, Any], source: Path | None = None) -> ExperimentConfig:
    """Build an experiment config from parsed TOML data.

    Raises:
        ConfigurationError: Naming every missing or invalid key.
    """
    unknown = sorted(set(data) - {"environment", "spectral", "run", "verify", "output"})
    if unknown:
        raise ConfigurationError(f"Unknown config sections: {unknown}")
    if "environment" not in data:
        raise ConfigurationError("Missing config sections: ['environment']")
    env = EnvironmentSpec.from_mapping(data["environment"])
    spectral_section = dict(data.get("spectral", {}))
    prefer_closed_form = bool(spectral_section.pop("closed_form", True))
    spectral = None
    if spectral_section:
        allowed = {"theta_min", "theta_max", "step", "samples", "seed", "mass_floor"}
        extra = sorted(set(spectral_section) - allowed)
        if extra:
            raise ConfigurationError(f"[spectral] unknown keys: {extra}")
        spectral = MonteCarloConfig(**spectral_section)
    output = data.get("output", {}).get("path")
    return ExperimentConfig(
        environment=env,
        run=_parse_run(data["run"]) if "run" in data else None,
        spectral=spectral,
        prefer_closed_form=prefer_closed_form,
        verify=_parse_verify(data["verify"]) if "verify" in data else None,
        output=Path(output) if output else None,
        source=source,
    )


def load_config(path: str | Path) -> ExperimentConfig:
    """Read an experiment config from a TOML file.

    Raises:
        ConfigurationError: If the file is unreadable, malformed or invalid.
    """
    path = Path(path)
    try:
        with path.open("rb") as f:
            data = tomllib.load(f)
    except FileNotFoundError as e:
        raise ConfigurationError(f"Config file not found: {path}") from e
    except tomllib.TOMLDecodeError as e:
        raise ConfigurationError(f"Malformed config {path}: {e}") from e
    return parse_config(data, source=path)


@lru_cache(maxsize=8)
def cached_profile(
    env: EnvironmentSpec, mc: MonteCarloConfig | None, prefer_closed_form: bool = True
) -> SpectralProfile:
    """Spectral profile of an environment, built once per process."""
    return build_profile(env, mc, prefer_closed_form=prefer_closed_form)


def _w_json(values: Mapping[float, float]) -> str:
    return json.dumps({f"{theta:g}": w for theta, w in sorted(values.items())})


@dataclass(frozen=True)
class _ReplicaTask:
    config: ExperimentConfig
    replica: int


def _allocate(
    run: RunSection,
    env: EnvironmentSpec,
    tree: WeightedTree | None,
    size: float,
    depth: int,
    rng: np.random.Generator,
) -> Allocation:
    if run.poissonized:
        return poissonize(tree if tree is not None else env, size, rng, J=depth)
    if tree is not None:
        return throw_balls_tree(tree, int(size), rng, depth=depth)
    return throw_balls_lazy(env, int(size), depth, rng)


def _constants(profile: SpectralProfile) -> CriticalConstants | None:
    """Critical constants, or None when the profile has none (lattice, no theta*)."""
    try:
        return critical_constants(profile)
    except (LatticeEnvironmentError, NoThetaStarError) as e:
        logger.debug("No critical constants: %s", e)
        return None


def _regime(
    run: RunSection, profile: SpectralProfile, constants: CriticalConstants | None
) -> RegimeLabel | None:
    if run.regime is not None:
        return run.regime
    if run.level_rule is None or constants is None:
        return None
    labels = classify_regime(constants, profile, run.level_rule.a)
    if labels == ("OutOfRange",):
        return None
    if "Freezing" in labels and run.mode == "tree_first":
        return "Freezing"
    # L is only counted on a materialized tree
    usable = [label for label in labels if label != "Freezing"]
    return usable[0] if usable else None


def _predicted(
    run: RunSection,
    profile: SpectralProfile,
    constants: CriticalConstants | None,
    regime: RegimeLabel | None,
    size: float,
    j: int,
    k: int,
    tree: WeightedTree | None,
    alloc: Allocation,
    counts: OccupancyCounts,
) -> tuple[float | None, float | None]:
    rule = run.level_rule
    if rule is None or regime is None or constants is None:
        return None, None
    if k != 1 and k != rule.k:
        return None, None
    inp = PredictionInput(
        profile=profile,
        constants=constants,
        regime=regime,
        n=size,
        j=j,
        a=rule.a,
        b=realized_offset(size, j, rule.a),
        k=k,
    )
    thetas = prediction_thetas(inp)
    if tree is not None:
        w_hat = estimate_w_hat(tree, thetas, profile)
        inp = replace(inp, w_hat=w_hat.values, w_approximate=w_hat.approximate)
    else:
        inp = replace(inp, w_hat=dict.fromkeys(thetas, 1.0))
    if run.poissonized:
        if regime == "I" and k == 1:
            return None, None
        pois = predict_poissonized(inp)
        if pois.form == "deficit":
            observed = float(alloc.balls - counts.K[1])
        elif pois.regime == "Freezing":
            observed = float(counts.L) if counts.L is not None else math.nan
        else:
            observed = float(counts.K[k])
        predicted = pois.mean
        rel = abs(observed - predicted) / predicted if predicted > 0 else None
        return predicted, rel
    prediction = predict(inp)
    comparison = compare(prediction, observed_quantity(prediction, counts, size))
    return prediction.value, comparison.relative_error


def _failed_row(replica: int, error: BaseException) -> dict[str, Any]:
    row: dict[str, Any] = dict.fromkeys(RESULT_COLUMNS)
    row["replica"] = replica
    row["W_theta_json"] = json.dumps({"error": f"{type(error).__name__}: {error}"})
    return row


def _run_replica(task: _ReplicaTask) -> list[dict[str, Any]]:
    config, r = task.config, task.replica
    run = config.run
    assert run is not None
    replica_seed = derive_seed(run.master_seed, REPLICA, r)
    try:
        env = config.environment
        profile = cached_profile(env, config.spectral, config.prefer_closed_form)
        constants = _constants(profile)
        regime = _regime(run, profile, constants)
        depth = run.depth()
        tree = (
            materialize_tree(env, depth, run.mass_floor, seed=replica_seed)
            if run.mode == "tree_first"
            else None
        )
        rows: list[dict[str, Any]] = []
        for i, size in enumerate(run.sizes):
            alloc = _allocate(run, env, tree, size, depth, stream(replica_seed, BALLS, i))
            check_allocation(alloc)
            for j in run.levels_for(size):
                counts = occupancy_counts(alloc, j, max(run.report_ks()), tree)
                w_values = level_stats(tree, j, run.thetas, profile).W if tree is not None else {}
                for k in run.report_ks():
                    try:
                        predicted, rel = _predicted(
                            run, profile, constants, regime, size, j, k, tree, alloc, counts
                        )
                    except InadmissibleRegimeError as e:
                        logger.warning("No prediction at n_or_t=%g, j=%d, k=%d: %s", size, j, k, e)
                        predicted, rel = None, None
                    rows.append(
                        {
                            "replica": r,
                            "n_or_t": float(size),
                            "j": j,
                            "k": k,
                            "K": counts.K[k],
                            "L": counts.L,
                            "Z": counts.Z,
                            "W_theta_json": _w_json(w_values),
                            "predicted": predicted,
                            "relative_error": rel,
                            "overflow_balls": counts.overflow,
                        }
                    )
    except NestoccError as e:
        logger.warning("Replica %d failed: %s", r, e)
        return [_failed_row(r, e)]
    logger.debug("Replica %d: %d rows", r, len(rows))
    return rows


def summarize(rows: pl.DataFrame) -> pl.DataFrame:
    """Medians and quartiles across replicas per (n_or_t, j, k)."""
    ok = rows.filter(pl.col("j").is_not_null())
    stats = []
    for col in ("K", "L", "relative_error"):
        stats.extend(
            [
                pl.col(col).cast(pl.Float64).quantile(0.25, "linear").alias(f"{col}_q25"),
                pl.col(col).cast(pl.Float64).median().alias(f"{col}_median"),
                pl.col(col).cast(pl.Float64).quantile(0.75, "linear").alias(f"{col}_q75"),
            ]
        )
    return (
        ok.group_by(["n_or_t", "j", "k"])
        .agg(
            pl.len().alias("replicas"),
            pl.col("predicted").first().alias("predicted"),
            *stats,
            pl.col("overflow_balls").sum().alias("overflow_balls"),
        )
        .sort(["n_or_t", "j", "k"])
    )


def _check_budget(config: ExperimentConfig, run: RunSection) -> None:
    if run.mode != "tree_first":
        return
    estimate = estimated_boxes(config.environment, run.depth())
    if math.isfinite(estimate) and estimate > max_boxes():
        raise MemoryBudgetError(estimate, max_boxes())


def run_experiment(
    config: ExperimentConfig, threads: int = 1, seed: int | None = None
) -> ExperimentResult:
    """Run every replica of the ``[run]`` section and collect rows.

    Args:
        config: Parsed experiment config.
        threads: Worker processes (1 runs in-process).
        seed: Master seed overriding the config.

    Returns:
        Rows in replica-major order with their summary.

    Raises:
        ConfigurationError: If the config has no ``[run]`` section or threads < 1.
        MemoryBudgetError: If the expected tree size exceeds the budget.
    """
    if seed is not None:
        config = config.with_seed(seed)
    run = config.run
    if run is None:
        raise ConfigurationError("Config has no [run] section")
    if threads < 1:
        raise ConfigurationError(f"threads must be at least 1, got {threads}")
    _check_budget(config, run)
    if run.mode == "ball_driven" and run.regime == "Freezing":
        raise ConfigurationError("Freezing needs exact box counts: use mode = 'tree_first'")

    tasks = [_ReplicaTask(config, r) for r in range(run.replicas)]
    logger.info(
        "Running %d replicas of %s on %d worker(s)",
        run.replicas,
        config.environment.describe(),
        threads,
    )
    if threads == 1:
        chunks = [_run_replica(task) for task in tasks]
    else:
        with Pool(processes=threads) as pool:
            chunks = pool.map(_run_replica, tasks)

    records = [row for chunk in chunks for row in chunk]
    rows = pl.DataFrame(records, schema=RESULT_SCHEMA)
    validate_no_duplicates(rows, ROW_KEYS)
    failed = tuple(sorted({int(r) for r in rows.filter(pl.col("j").is_null())["replica"]}))
    realized: list[tuple[float, int, float | None]] = []
    for size in run.sizes:
        for j in run.levels_for(size):
            offset = (
                realized_offset(size, j, run.level_rule.a)
                if run.level_rule is not None and size > 1
                else None
            )
            realized.append((size, j, offset))
    overflow = rows["overflow_balls"].fill_null(0).sum()
    profile = cached_profile(config.environment, config.spectral, config.prefer_closed_form)
    regime: tuple[RegimeLabel, ...] = ()
    constants = _constants(profile)
    if run.level_rule is not None and constants is not None:
        regime = classify_regime(constants, profile, run.level_rule.a)
    if failed:
        logger.warning("%d of %d replicas failed", len(failed), run.replicas)
    return ExperimentResult(
        rows=rows,
        summary=summarize(rows),
        realized_levels=tuple(realized),
        failed_replicas=failed,
        acceptance_grade=overflow == 0,
        regime=regime,
    )


def _verify_one(
    tree: WeightedTree,
    verify: VerifySection,
    j: int,
    profile: SpectralProfile,
    constants: CriticalConstants,
) -> Discrepancy:
    if verify.check == "local_limit":
        return check_local_limit(
            tree, verify.theta, j, verify.h_grid, verify.x_grid, profile, constants
        )
    if verify.check == "renewal":
        return check_renewal_sum(
            tree,
            verify.theta,
            j,
            verify.kernel,
            verify.y_grid,
            k=verify.k,
            profile=profile,
            constants=constants,
        )
    return check_clt_tail(
        tree,
        verify.theta,
        j,
        verify.y_grid,
        delta=verify.delta,
        mode=verify.mode,
        profile=profile,
        constants=constants,
    )


def run_verification(config: ExperimentConfig, seed: int | None = None) -> pl.DataFrame:
    """Run the ``[verify]`` check on independent trees, one per seed.

    Returns:
        One row per (seed, j) with the sup discrepancy and the exactness flag.

    Raises:
        ConfigurationError: If the config has no ``[verify]`` section.
    """
    if seed is not None:
        config = config.with_seed(seed)
    verify = config.verify
    if verify is None:
        raise ConfigurationError("Config has no [verify] section")
    profile = cached_profile(config.environment, config.spectral, config.prefer_closed_form)
    constants = critical_constants(profile)
    depth = max(verify.j_list)
    records: list[dict[str, Any]] = []
    for s in range(verify.seeds):
        tree = materialize_tree(
            config.environment,
            depth,
            verify.mass_floor,
            seed=derive_seed(verify.master_seed, REPLICA, s),
        )
        for j in verify.j_list:
            result = _verify_one(tree, verify, j, profile, constants)
            records.append(
                {
                    "seed": s,
                    "j": j,
                    "theta": verify.theta,
                    "check": verify.check,
                    "sup_discrepancy": result.sup_discrepancy,
                    "exact_level": result.exact_level,
                }
            )
        logger.debug("Verification seed %d done", s)
    return pl.DataFrame(records)


def sweep(
    profile: SpectralProfile,
    a_grid: Sequence[float] | np.ndarray,
    constants: CriticalConstants | None = None,
) -> pl.DataFrame:
    """Regime labels, theta(a), lambda*(a) and alpha(a) over a grid of densities.

    alpha is null outside (a_*, a-bar), theta and lambda* where -lambda' = a
    has no solution.
    """
    constants = constants or critical_constants(profile)
    records: list[dict[str, Any]] = []
    for value in a_grid:
        a = float(value)
        labels = classify_regime(constants, profile, a)
        try:
            theta: float | None = solve_theta_for_slope(profile, a)
            rate: float | None = legendre(profile, a)
        except NestoccError:
            theta = rate = None
        alpha = (
            alpha_exponent(profile, a, constants) if constants.a_star < a < constants.a_bar else None
        )
        records.append(
            {
                "a": a,
                "regime": "+".join(labels),
                "theta": theta,
                "legendre": rate,
                "alpha": alpha,
            }
        )
    return pl.DataFrame(
        records,
        schema={
            "a": pl.Float64,
            "regime": pl.Utf8,
            "theta": pl.Float64,
            "legendre": pl.Float64,
            "alpha": pl.Float64,
        },
    )


def default_output(config: ExperimentConfig, name: str) -> Path:
    """Output path of a run: the config's ``[output] path`` or the output dir."""
    if config.output is not None:
        return config.output
    stem = config.source.stem if config.source is not None else "run"
    return get_output_dir() / f"{stem}.{name}.csv"
