#!/usr/bin/env python3
"""Run the desk-scale acceptance experiments and print pass/fail per criterion."""

import argparse
import logging
import math
from collections.abc import Callable
from pathlib import Path

import numpy as np
import polars as pl

from nestocc import (
    EnvironmentSpec,
    build_profile,
    compare_allocators,
    conditional_moments,
    critical_constants,
    legendre,
    load_config,
    materialize_tree,
    martingale,
    run_experiment,
    run_verification,
    solve_theta_for_slope,
    throw_balls_lazy,
    throw_balls_tree,
)
from nestocc._internal import validation
from nestocc.occupancy import locate_balls
from nestocc.predictions import log_slope
from nestocc.rng import BALLS, REPLICA, derive_seed, stream
from nestocc.spectral import alpha_exponent

logging.basicConfig(
    level=logging.INFO,
    format="%(asctime)s - %(levelname)s - %(message)s",
    datefmt="%Y-%m-%d %H:%M:%S",
)
logger = logging.getLogger(__name__)

CONFIG_DIR = Path(__file__).parent.parent / "configs"
DIRICHLET = EnvironmentSpec.dirichlet_split(2, 1.0)
UNIFORM = EnvironmentSpec.bernoulli_sieve()

Outcome = tuple[bool, str]


def exact_identities(threads: int) -> Outcome:
    """Ball and mass conservation on 1000 randomized small instances."""
    rng = np.random.default_rng(0)
    envs = [DIRICHLET, UNIFORM, EnvironmentSpec.dirichlet_split(3, 0.5)]
    worst_w = 0.0
    for i in range(1000):
        env = envs[i % len(envs)]
        J = int(rng.integers(1, 6))
        n = int(rng.integers(0, 200))
        tree = materialize_tree(env, J, 1e-6, seed=i)
        for j in range(1, J + 1):
            validation.check_tree_conservation(tree.level(j), j)
        validation.check_allocation(throw_balls_tree(tree, n, stream(i, BALLS, 0)))
        validation.check_allocation(throw_balls_lazy(env, n, J, stream(i, BALLS, 1)))
        if env.finite_offspring:
            worst_w = max(worst_w, abs(martingale(tree, 1.0, J).value - 1.0))
    return worst_w <= 1e-9, f"max |W_j(1) - 1| = {worst_w:.2e}"


def spectral_golden(threads: int) -> Outcome:
    """Closed-form constants of the uniform sieve and of DirichletSplit(2,1)."""
    uniform = build_profile(UNIFORM)
    cu = critical_constants(uniform)
    dirichlet = build_profile(DIRICHLET)
    cd = critical_constants(dirichlet)
    checks = [
        abs(cu.theta_star - math.e) <= 1e-8,
        abs(cu.a_star - math.log(2) / 2) <= 1e-10,
        abs(cu.a_c - 1.0) <= 1e-10,
        abs(legendre(uniform, cu.v)) <= 1e-8,
        abs(cd.theta_star - 3.3111) <= 1e-3,
        abs(cd.theta_sub + 0.6265) <= 1e-3,
    ]
    return all(checks), f"theta*={cu.theta_star:.10f} theta*(D)={cd.theta_star:.4f}"


def moment_oracle(threads: int, replicas: int = 10_000) -> Outcome:
    """Poissonized mean of K against the exact quenched mean on 20 trees."""
    worst = 0.0
    for s in range(20):
        tree = materialize_tree(DIRICHLET, 12, seed=derive_seed(3, REPLICA, s))
        for t in (10.0, 100.0, 1000.0):
            rng = stream(3, BALLS, s, int(t))
            sizes = rng.poisson(t, replicas)
            owner = np.repeat(np.arange(replicas), sizes)
            boxes = locate_balls(tree, rng.random(int(sizes.sum())), 12)[-1]
            key, count = np.unique(owner * tree.level(12).size + boxes, return_counts=True)
            key_owner = key // tree.level(12).size
            for k in (1, 2, 3):
                K = np.bincount(key_owner, weights=count >= k, minlength=replicas)
                moments = conditional_moments(tree, t, 12, k)
                se = math.sqrt(max(moments.variance, 1e-12) / replicas)
                worst = max(worst, abs(float(K.mean()) - moments.mean) / se)
    return worst <= 4.0, f"max standardized error {worst:.2f}"


def regime_one(threads: int) -> Outcome:
    """Collision fraction decreases in n and is at most 5% at n = 1e5."""
    result = run_experiment(load_config(CONFIG_DIR / "regime1.toml"), threads=threads)
    fractions = (
        result.rows.filter(pl.col("k") == 2)
        .group_by("n_or_t")
        .agg((pl.col("K") > 0).mean().alias("collided"))
        .sort("n_or_t")
    )["collided"].to_list()
    ok = all(a > b for a, b in zip(fractions, fractions[1:], strict=False)) and fractions[-1] <= 0.05
    return ok, f"collision fractions {fractions}"


def regime_three(threads: int) -> Outcome:
    """Median K/n near Phi(0) = 1/2 at n = 1e5 and approaching it."""
    result = run_experiment(load_config(CONFIG_DIR / "regime3.toml"), threads=threads)
    medians = (
        result.rows.filter(pl.col("k") == 1)
        .group_by("n_or_t")
        .agg((pl.col("K") / pl.col("n_or_t")).median().alias("fraction"))
        .sort("n_or_t")
    )["fraction"].to_list()
    ok = abs(medians[-1] - 0.5) <= 0.15 and abs(medians[-1] - 0.5) < abs(medians[0] - 0.5)
    return ok, f"median K/n {medians}"


def regime_two(threads: int) -> Outcome:
    """Log-log slope of the deficit against alpha(0.45)."""
    config = load_config(CONFIG_DIR / "regime2.toml")
    result = run_experiment(config, threads=threads)
    summary = (
        result.rows.filter(pl.col("k") == 1)
        .group_by("n_or_t")
        .agg((pl.col("n_or_t") - pl.col("K")).median().alias("deficit"))
        .sort("n_or_t")
    )
    slope = log_slope(summary["n_or_t"].to_numpy(), summary["deficit"].to_numpy())
    target = alpha_exponent(build_profile(UNIFORM), 0.45)
    return abs(slope - target) <= 0.1, f"slope {slope:.4f} vs alpha {target:.4f}"


def local_limit_trend(threads: int) -> Outcome:
    """Median sup discrepancy strictly decreasing in j."""
    table = run_verification(load_config(CONFIG_DIR / "local_limit.toml"))
    medians = (
        table.group_by("j").agg(pl.col("sup_discrepancy").median()).sort("j")
    )["sup_discrepancy"].to_list()
    ok = all(a > b for a, b in zip(medians, medians[1:], strict=False))
    return ok, f"median sup discrepancy {medians}"


def freezing(threads: int) -> Outcome:
    """Most boxes occupied at a = 1.5 and L grows like n^(theta + lambda(theta)/a)."""
    result = run_experiment(load_config(CONFIG_DIR / "freezing.toml"), threads=threads)
    per_n = (
        result.rows.filter(pl.col("k") == 1)
        .group_by("n_or_t")
        .agg(
            (pl.col("L") / pl.col("Z")).median().alias("empty_share"),
            pl.col("L").median().alias("L"),
        )
        .sort("n_or_t")
    )
    profile = build_profile(DIRICHLET)
    theta = solve_theta_for_slope(profile, 1.5)
    target = theta + profile.lambda_(theta) / 1.5
    slope = log_slope(per_n["n_or_t"].to_numpy(), per_n["L"].to_numpy())
    share = float(per_n["empty_share"][-1])
    ok = share <= 0.25 and abs(slope - target) <= 0.15
    return ok, f"L/Z {share:.3f}, slope {slope:.4f} vs {target:.4f}"


def cross_allocator(threads: int) -> Outcome:
    """Tree-first and ball-driven laws of K agree at the 1% level."""
    res = compare_allocators(DIRICHLET, 8, 6, 100_000, seed=9)
    return res.p_value >= 0.01, f"chi2={res.statistic:.3f} dof={res.dof} p={res.p_value:.4f}"


CRITERIA: dict[str, Callable[[int], Outcome]] = {
    "1-exact-identities": exact_identities,
    "2-spectral-golden": spectral_golden,
    "3-moment-oracle": moment_oracle,
    "4-regime-I": regime_one,
    "5-regime-III": regime_three,
    "6-regime-II": regime_two,
    "7-local-limit": local_limit_trend,
    "8-freezing": freezing,
    "9-cross-allocator": cross_allocator,
}


def main() -> int:
    parser = argparse.ArgumentParser(description=__doc__)
    parser.add_argument("--threads", type=int, default=1)
    parser.add_argument("--only", nargs="*", default=None, help="Criterion name prefixes")
    args = parser.parse_args()

    failures = 0
    for name, check in CRITERIA.items():
        if args.only and not any(name.startswith(prefix) for prefix in args.only):
            continue
        logger.info("Running %s", name)
        passed, detail = check(args.threads)
        failures += not passed
        print(f"{'PASS' if passed else 'FAIL'} {name}: {detail}")
    return 1 if failures else 0


if __name__ == "__main__":
    raise SystemExit(main())
