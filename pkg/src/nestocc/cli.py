"""Command-line interface for nestocc."""

from __future__ import annotations

import argparse
import logging
import sys
from dataclasses import replace
from pathlib import Path
from typing import get_args

import numpy as np
import polars as pl

from .environment import EnvironmentSpec
from .exceptions import NestoccError
from .experiment import (
    ExperimentConfig,
    cached_profile,
    default_output,
    load_config,
    run_experiment,
    run_verification,
    sweep,
)
from .io import write_csv, write_results_csv
from .manifest import build_run_manifest
from .predictions import PredictionInput, level_for, predict, prediction_thetas
from .reports import format_constants, format_regime, format_summary, format_sweep
from .spectral import classify_regime, critical_constants, solve_theta_for_slope
from .types import RegimeLabel

logger = logging.getLogger(__name__)


def _progress(message: str) -> None:
    print(f"[nestocc] {message}", file=sys.stderr)


def _common_parser() -> argparse.ArgumentParser:
    common = argparse.ArgumentParser(add_help=False)
    common.add_argument("--config", type=Path, default=None, help="Experiment config (TOML)")
    common.add_argument("--out", type=Path, default=None, help="Output CSV path")
    common.add_argument("--threads", type=int, default=1, help="Worker processes")
    common.add_argument("--seed", type=int, default=None, help="Master seed (overrides config)")
    common.add_argument("--verbose", action="store_true", help="Debug logging")
    return common


def build_parser() -> argparse.ArgumentParser:
    """Build the top-level CLI argument parser."""
    common = _common_parser()
    parser = argparse.ArgumentParser(prog="nestocc")
    subparsers = parser.add_subparsers(dest="command", required=True)

    subparsers.add_parser("spectral", parents=[common], help="Print the critical constants")

    classify_parser = subparsers.add_parser(
        "classify", parents=[common], help="Classify the regime of a density a"
    )
    classify_parser.add_argument("--a", type=float, required=True, help="Ball density a")

    subparsers.add_parser("simulate", parents=[common], help="Run the [run] experiment")

    predict_parser = subparsers.add_parser(
        "predict", parents=[common], help="Leading-order prediction with W-hat = 1"
    )
    predict_parser.add_argument("--a", type=float, required=True, help="Ball density a")
    predict_parser.add_argument("--n", type=float, required=True, help="Number of balls")
    predict_parser.add_argument("--b", type=float, default=0.0, help="Level offset b")
    predict_parser.add_argument("--k", type=int, default=1, help="Ball threshold k")
    predict_parser.add_argument(
        "--regime", choices=get_args(RegimeLabel), default=None, help="Force a regime"
    )

    subparsers.add_parser(
        "verify-llt", parents=[common], help="Run the [verify] Gibbs-measure check"
    )

    sweep_parser = subparsers.add_parser(
        "sweep", parents=[common], help="Sweep a and report regime boundaries and alpha(a)"
    )
    sweep_parser.add_argument("--a-min", type=float, default=0.1)
    sweep_parser.add_argument("--a-max", type=float, default=3.0)
    sweep_parser.add_argument("--a-step", type=float, default=0.05)
    return parser


def _config(args: argparse.Namespace) -> ExperimentConfig:
    if args.config is None:
        return ExperimentConfig(environment=EnvironmentSpec.bernoulli_sieve())
    return load_config(args.config)


def _cmd_spectral(args: argparse.Namespace) -> int:
    config = _config(args)
    profile = cached_profile(config.environment, config.spectral, config.prefer_closed_form)
    constants = critical_constants(profile)
    print(format_constants(config.environment, profile, constants))
    if args.out is not None:
        write_csv(pl.DataFrame([constants.as_dict()]), args.out)
    return 0


def _cmd_classify(args: argparse.Namespace) -> int:
    config = _config(args)
    profile = cached_profile(config.environment, config.spectral, config.prefer_closed_form)
    labels = classify_regime(critical_constants(profile), profile, args.a)
    try:
        theta: float | None = solve_theta_for_slope(profile, args.a)
    except NestoccError:
        theta = None
    print(format_regime(labels, theta))
    return 0


def _cmd_simulate(args: argparse.Namespace) -> int:
    config = _config(args)
    if args.seed is not None:
        config = config.with_seed(args.seed)
    _progress(f"simulating {config.environment.describe()} on {args.threads} worker(s)")
    result = run_experiment(config, threads=args.threads)
    out = args.out or default_output(config, "results")
    write_results_csv(result.rows, out)
    build_run_manifest(config, result, out)
    print(format_summary(result))
    _progress(f"wrote {out}")
    return 0


def _cmd_predict(args: argparse.Namespace) -> int:
    config = _config(args)
    profile = cached_profile(config.environment, config.spectral, config.prefer_closed_form)
    constants = critical_constants(profile)
    regime: RegimeLabel = args.regime or classify_regime(constants, profile, args.a)[0]
    j = max(1, level_for(args.n, args.a, args.b))
    inp = PredictionInput(
        profile=profile,
        constants=constants,
        regime=regime,
        n=args.n,
        j=j,
        a=args.a,
        b=args.b,
        k=args.k,
    )
    prediction = predict(replace(inp, w_hat=dict.fromkeys(prediction_thetas(inp), 1.0)))
    theta = "" if prediction.theta is None else f" theta={prediction.theta:.6g}"
    print(f"{prediction.regime} {prediction.form}={prediction.value:.10g} j={j}{theta}")
    if args.out is not None:
        write_csv(
            pl.DataFrame(
                [
                    {
                        "regime": prediction.regime,
                        "form": prediction.form,
                        "n": args.n,
                        "j": j,
                        "k": prediction.k,
                        "value": prediction.value,
                    }
                ]
            ),
            args.out,
        )
    return 0


def _cmd_verify(args: argparse.Namespace) -> int:
    config = _config(args)
    _progress("running Gibbs-measure checks")
    table = run_verification(config, seed=args.seed)
    medians = table.group_by("j").agg(pl.col("sup_discrepancy").median()).sort("j")
    for j, value in medians.iter_rows():
        print(f"j={j} median sup_discrepancy={value:.6g}")
    out = args.out or default_output(config, "verify")
    write_csv(table, out)
    _progress(f"wrote {out}")
    return 0


def _cmd_sweep(args: argparse.Namespace) -> int:
    config = _config(args)
    profile = cached_profile(config.environment, config.spectral, config.prefer_closed_form)
    count = int(round((args.a_max - args.a_min) / args.a_step)) + 1
    grid = np.round(args.a_min + args.a_step * np.arange(count), 12)
    table = sweep(profile, grid)
    print(format_sweep(table))
    if args.out is not None:
        write_csv(table, args.out)
    return 0


_COMMANDS = {
    "spectral": _cmd_spectral,
    "classify": _cmd_classify,
    "simulate": _cmd_simulate,
    "predict": _cmd_predict,
    "verify-llt": _cmd_verify,
    "sweep": _cmd_sweep,
}


def main(argv: list[str] | None = None) -> int:
    """Run CLI entrypoint."""
    parser = build_parser()
    args = parser.parse_args(argv)
    logging.basicConfig(
        level=logging.DEBUG if args.verbose else logging.WARNING,
        format="%(levelname)s %(name)s: %(message)s",
    )
    try:
        return _COMMANDS[args.command](args)
    except NestoccError as e:
        _progress(f"error: {e}")
        return 1
