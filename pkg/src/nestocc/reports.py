"""Human-readable text reports for the command line."""

from __future__ import annotations

import math

import polars as pl

from .environment import EnvironmentSpec
from .experiment import ExperimentResult
from .spectral import CriticalConstants, SpectralProfile
from .types import RegimeLabel


def _fmt(value: float | None, spec: str = ".10g") -> str:
    if value is None:
        return "n/a"
    if math.isinf(value):
        return "inf" if value > 0 else "-inf"
    return format(value, spec)


def format_constants(
    env: EnvironmentSpec, profile: SpectralProfile, constants: CriticalConstants
) -> str:
    """Aligned block of the critical constants followed by a key=value line."""
    pairs: list[tuple[str, float | None]] = [
        ("theta*", constants.theta_star),
        ("v", constants.v),
        ("theta_*", constants.theta_sub),
        ("a_*", constants.a_star),
        ("a_c", constants.a_c),
        ("a_bar", constants.a_bar),
        ("a_bar_minus", constants.a_bar_minus),
        ("theta_lower", profile.theta_lower),
    ]
    lines = [
        f"environment   {env.describe()}",
        f"source        {profile.source}",
        f"property      {constants.property}",
    ]
    lines.extend(f"{name:<13} {_fmt(value)}" for name, value in pairs)
    lines.append(" ".join(f"{name}={_fmt(value)}" for name, value in pairs))
    return "\n".join(lines)


def format_regime(labels: tuple[RegimeLabel, ...], theta: float | None) -> str:
    """One-line regime verdict, e.g. ``IIC (θ=1.3333)``."""
    text = "+".join(labels)
    if theta is None or labels == ("OutOfRange",):
        return text
    return f"{text} (θ={theta:.4f})"


def regime_boundaries(sweep_df: pl.DataFrame) -> list[tuple[float, str, str]]:
    """Grid points where the regime label changes: (a, label before, label after)."""
    rows = sweep_df.select(["a", "regime"]).rows()
    return [
        (a, previous, label)
        for (_, previous), (a, label) in zip(rows, rows[1:], strict=False)
        if label != previous
    ]


def format_sweep(sweep_df: pl.DataFrame) -> str:
    """Regime boundaries and the peak of alpha(a) over a sweep."""
    lines = [f"{'a':>8}  {'regime':<14} {'theta':>10} {'alpha':>10}"]
    for a, regime, theta, _, alpha in sweep_df.iter_rows():
        lines.append(f"{a:>8.4f}  {regime:<14} {_fmt(theta, '.6f'):>10} {_fmt(alpha, '.6f'):>10}")
    for a, before, after in regime_boundaries(sweep_df):
        lines.append(f"boundary near a={a:.4f}: {before} -> {after}")
    alphas = sweep_df.drop_nulls("alpha")
    if alphas.height:
        peak = alphas.row(int(alphas["alpha"].arg_max() or 0), named=True)
        lines.append(f"alpha peaks at a={peak['a']:.4f} with alpha={peak['alpha']:.6f}")
    return "\n".join(lines)


def format_summary(result: ExperimentResult) -> str:
    """Per-(n_or_t, j, k) medians with the run's regime and quality flags."""
    lines = []
    if result.regime:
        lines.append(f"regime        {'+'.join(result.regime)}")
    for size, j, offset in result.realized_levels:
        lines.append(f"level         n_or_t={size:g} j={j} b_realized={_fmt(offset, '.4f')}")
    lines.append(f"acceptance    {'yes' if result.acceptance_grade else 'no (overflow balls)'}")
    if result.failed_replicas:
        lines.append(f"failed        {list(result.failed_replicas)}")
    lines.append(f"{'n_or_t':>10} {'j':>4} {'k':>3} {'K_median':>12} {'predicted':>14} {'relerr_med':>12}")
    for row in result.summary.iter_rows(named=True):
        lines.append(
            f"{row['n_or_t']:>10g} {row['j']:>4d} {row['k']:>3d} "
            f"{_fmt(row['K_median'], '.6g'):>12} {_fmt(row['predicted'], '.6g'):>14} "
            f"{_fmt(row['relative_error_median'], '.4f'):>12}"
        )
    return "\n".join(lines)
