from __future__ import annotations

from .config import Config, configure, get_config
from .environment import EnvironmentSpec, StickLaw, mc_log_laplace, sample_fragmentation
from .exceptions import (
    ConfigurationError,
    DomainError,
    InadmissibleRegimeError,
    LatticeEnvironmentError,
    MemoryBudgetError,
    MissingBoxCountError,
    NestoccError,
    NoThetaStarError,
    SlopeOutOfRangeError,
)
from .experiment import ExperimentConfig, load_config, run_experiment, run_verification, sweep
from .local_limit import check_clt_tail, check_local_limit, check_renewal_sum
from .occupancy import (
    compare_allocators,
    conditional_covariance,
    conditional_moments,
    depoissonization_sandwich,
    occupancy_counts,
    poissonize,
    throw_balls_lazy,
    throw_balls_tree,
)
from .predictions import (
    PredictionInput,
    collision_bound,
    compare,
    estimate_w_hat,
    level_for,
    predict,
    predict_at_least_k,
    predict_poissonized,
)
from .spectral import (
    MonteCarloConfig,
    alpha_exponent,
    build_profile,
    classify_regime,
    critical_constants,
    legendre,
    solve_theta_for_slope,
    solve_theta_star,
)
from .tree import extend_tree, level_stats, martingale, materialize_tree
from .types import AllocationMode, EnvironmentKind, RegimeLabel

__all__ = [
    "AllocationMode",
    "Config",
    "ConfigurationError",
    "DomainError",
    "EnvironmentKind",
    "EnvironmentSpec",
    "ExperimentConfig",
    "InadmissibleRegimeError",
    "LatticeEnvironmentError",
    "MemoryBudgetError",
    "MissingBoxCountError",
    "MonteCarloConfig",
    "NestoccError",
    "NoThetaStarError",
    "PredictionInput",
    "RegimeLabel",
    "SlopeOutOfRangeError",
    "StickLaw",
    "alpha_exponent",
    "build_profile",
    "check_clt_tail",
    "check_local_limit",
    "check_renewal_sum",
    "classify_regime",
    "collision_bound",
    "compare",
    "compare_allocators",
    "conditional_covariance",
    "conditional_moments",
    "configure",
    "critical_constants",
    "depoissonization_sandwich",
    "estimate_w_hat",
    "extend_tree",
    "get_config",
    "legendre",
    "level_for",
    "level_stats",
    "load_config",
    "martingale",
    "materialize_tree",
    "mc_log_laplace",
    "occupancy_counts",
    "poissonize",
    "predict",
    "predict_at_least_k",
    "predict_poissonized",
    "run_experiment",
    "run_verification",
    "sample_fragmentation",
    "solve_theta_for_slope",
    "solve_theta_star",
    "sweep",
    "throw_balls_lazy",
    "throw_balls_tree",
]

__version__ = "0.1.0"
