"""Leading-order occupancy predictions.

Given a level j, a ball count n (or Poisson intensity t), the spectral
profile and same-realization martingale values W_hat(theta), this module
evaluates the almost-sure leading-order behavior of the occupancy counts in
every density regime:

    - I: every ball alone, K = n
    - IIA / IIB / IIC: the deficit n - K
    - III: the fraction K / n
    - IV: the count K
    - at-least-k saturation: the count K(k)
    - Freezing: the empty-box count L

IIC, IV and Freezing share one Gaussian template that differs only in its
Gamma coefficient. Every product is evaluated in log-space.
"""

from __future__ import annotations

import logging
import math
from collections.abc import Mapping
from dataclasses import dataclass, field

import numpy as np
from numpy.typing import ArrayLike
from scipy.special import gamma, gammaln, log_ndtr, ndtr

from .exceptions import ConfigurationError, DomainError, InadmissibleRegimeError
from .kernels import phi
from .occupancy import OccupancyCounts
from .spectral import (
    CriticalConstants,
    SpectralProfile,
    classify_regime,
    solve_theta_for_slope,
)
from .tree import WeightedTree, martingale
from .types import PredictionForm, RegimeLabel

logger = logging.getLogger(__name__)

W_HAT_KEY_TOL = 1e-12

_TEMPLATE_REGIMES = ("IIC", "IV", "Freezing")


def level_for(n: float, a: float, b: float = 0.0) -> int:
    """Level j_n = round-half-up((log n - b sqrt(log n)) / a).

    Example:
        >>> level_for(1e5, 0.5)
        23
    """
    if not a > 0:
        raise ConfigurationError(f"Level rule needs a > 0, got a={a!r}")
    if not n > 1:
        raise ConfigurationError(f"Level rule needs n > 1, got n={n!r}")
    log_n = math.log(n)
    return int(math.floor((log_n - b * math.sqrt(log_n)) / a + 0.5))


def realized_offset(n: float, j: int, a: float) -> float:
    """Realized offset (log n - a j) / sqrt(log n) of a level."""
    log_n = math.log(n)
    return (log_n - a * j) / math.sqrt(log_n)


@dataclass(frozen=True)
class PredictionInput:
    """Everything a prediction needs.

    Attributes:
        profile: Spectral profile.
        constants: Critical constants of the profile.
        regime: Density regime to evaluate.
        n: Ball count (or Poisson intensity t for ``predict_poissonized``).
        j: Level.
        a: Ball density (ignored by the at-least-k form, which uses -lambda'(k)).
        b: Second-order level offset supplied by the experiment.
        k: Ball threshold; k >= 2 selects the at-least-k saturation form.
        w_hat: Estimated martingale limits keyed by theta.
        w_approximate: Whether any W_hat value is flagged approximate.
    """

    profile: SpectralProfile
    constants: CriticalConstants
    regime: RegimeLabel
    n: float
    j: int
    a: float
    b: float = 0.0
    k: int = 1
    w_hat: Mapping[float, float] = field(default_factory=dict)
    w_approximate: bool = False


@dataclass(frozen=True)
class Prediction:
    """A leading-order prediction.

    Attributes:
        value: Predicted value (n, a deficit, a fraction or a count).
        log_value: Natural log of ``value`` (-inf when zero).
        form: What ``value`` measures.
        regime: Regime the formula belongs to.
        k: Ball threshold of the predicted count.
        theta: theta solving -lambda'(theta) = a, when used.
        breakdown: Coefficient pieces (Gamma factor, Gaussian factor, W_hat, exponents).
        approximate: Propagated W_hat flag.
    """

    value: float
    log_value: float
    form: PredictionForm
    regime: RegimeLabel
    k: int = 1
    theta: float | None = None
    breakdown: dict[str, float] = field(default_factory=dict)
    approximate: bool = False


def lookup_w_hat(w_hat: Mapping[float, float], theta: float) -> float:
    """Return W_hat(theta), matching keys within 1e-12.

    Raises:
        ConfigurationError: If no key matches.
    """
    for key, value in w_hat.items():
        if abs(key - theta) <= W_HAT_KEY_TOL:
            return float(value)
    raise ConfigurationError(
        f"W_hat is missing theta={theta!r} (available: {sorted(w_hat)})"
    )


def template_coefficient(regime: RegimeLabel, theta: float) -> float:
    """Gamma coefficient of the shared Gaussian template.

    IIC: Gamma(2-theta)/(theta(theta-1)); IV: Gamma(1-theta)/theta;
    Freezing: Gamma(-theta).
    """
    if regime == "IIC":
        return float(gamma(2.0 - theta)) / (theta * (theta - 1.0))
    if regime == "IV":
        return float(gamma(1.0 - theta)) / theta
    if regime == "Freezing":
        return float(gamma(-theta))
    raise DomainError(f"No Gaussian template for regime {regime!r}")


def _log_template_coefficient(regime: RegimeLabel, theta: float) -> float:
    if regime == "IIC":
        return float(gammaln(2.0 - theta)) - math.log(theta * (theta - 1.0))
    if regime == "IV":
        return float(gammaln(1.0 - theta)) - math.log(theta)
    return float(gammaln(-theta))


def _theta_window(regime: RegimeLabel, theta: float) -> bool:
    if regime == "IIC":
        return 1.0 < theta < 2.0
    if regime == "IV":
        return 0.0 < theta < 1.0
    return theta < 0.0


def prediction_thetas(inp: PredictionInput) -> tuple[float, ...]:
    """theta values at which W_hat is needed for this input."""
    if inp.k >= 2:
        return (float(inp.k),)
    if inp.regime in ("IIA", "IIB"):
        return (2.0,)
    if inp.regime in _TEMPLATE_REGIMES:
        return (solve_theta_for_slope(inp.profile, inp.a),)
    return ()


def _check_admissible(inp: PredictionInput) -> None:
    if inp.j < 1:
        raise InadmissibleRegimeError(f"Level must be positive, got j={inp.j}")
    if inp.k >= 2:
        if not inp.profile.theta_lower < inp.k < inp.constants.theta_star:
            raise InadmissibleRegimeError(
                f"At-least-k form needs k in (underline-theta, theta*="
                f"{inp.constants.theta_star:.6g}), got k={inp.k}"
            )
        return
    labels = classify_regime(inp.constants, inp.profile, inp.a)
    if inp.regime not in labels:
        raise InadmissibleRegimeError(
            f"Regime {inp.regime} requested but a={inp.a!r} classifies as {'/'.join(labels)}"
        )
    if inp.regime == "Freezing" and inp.constants.property != "B":
        raise InadmissibleRegimeError("Freezing needs property B (underline-theta < 0)")


def _template_log(inp: PredictionInput, log_scale: float) -> tuple[float, float, dict[str, float]]:
    """log of coeff * e^{-a b^2 / (2 lambda'')} / sqrt(2 pi lambda'') * W * scale^theta e^{lambda j} / sqrt(j)."""
    profile = inp.profile
    theta = solve_theta_for_slope(profile, inp.a)
    if not _theta_window(inp.regime, theta):
        raise InadmissibleRegimeError(
            f"theta={theta:.6g} solving -lambda'(theta)={inp.a!r} is outside the {inp.regime} window"
        )
    curvature = profile.d2lambda(theta)
    w = lookup_w_hat(inp.w_hat, theta)
    log_coeff = _log_template_coefficient(inp.regime, theta)
    log_gauss = -inp.a * inp.b**2 / (2.0 * curvature) - 0.5 * math.log(2.0 * math.pi * curvature)
    log_growth = theta * log_scale + profile.lambda_(theta) * inp.j - 0.5 * math.log(inp.j)
    breakdown = {
        "theta": theta,
        "coefficient": math.exp(log_coeff),
        "gaussian_factor": math.exp(log_gauss),
        "W_hat": w,
        "log_growth": log_growth,
        "lambda2": curvature,
    }
    return log_coeff + log_gauss + math.log(w) + log_growth, theta, breakdown


def predict_at_least_k(inp: PredictionInput) -> Prediction:
    """Saturation form for K(k) at the level j = log n / (-lambda'(k)) + offset.

    (1/k!) W(k) Phi(-b sqrt(-lambda'(k)/lambda''(k))) n^k e^{lambda(k) j}
    e^{-(k-1)(lambda'(k) j + log n)}. At k = 1 this is n Phi(-b sqrt(a_c/lambda''(1))).
    """
    profile = inp.profile
    k = float(inp.k)
    slope = profile.dlambda(k)
    w = 1.0 if inp.k == 1 else lookup_w_hat(inp.w_hat, k)
    log_phi = float(log_ndtr(-inp.b * math.sqrt(-slope / profile.d2lambda(k))))
    log_n = math.log(inp.n)
    log_value = (
        -float(gammaln(k + 1.0))
        + math.log(w)
        + log_phi
        + k * log_n
        + profile.lambda_(k) * inp.j
        - (k - 1.0) * (slope * inp.j + log_n)
    )
    return Prediction(
        value=math.exp(log_value),
        log_value=log_value,
        form="count",
        regime="III",
        k=inp.k,
        theta=k,
        breakdown={"W_hat": w, "phi_factor": math.exp(log_phi), "theta": k},
        approximate=inp.w_approximate,
    )


def predict(inp: PredictionInput) -> Prediction:
    """Evaluate the leading-order prediction of the requested regime.

    Raises:
        InadmissibleRegimeError: If the regime does not apply to (profile, a),
            or k is outside (underline-theta, theta*) for the at-least-k form.
        ConfigurationError: If a needed W_hat value is missing.
    """
    _check_admissible(inp)
    if inp.k >= 2:
        return predict_at_least_k(inp)
    profile = inp.profile
    log_n = math.log(inp.n)
    regime = inp.regime
    if regime == "I":
        return Prediction(value=inp.n, log_value=log_n, form="exact_n", regime=regime)
    if regime in ("IIA", "IIB"):
        w = lookup_w_hat(inp.w_hat, 2.0)
        log_value = math.log(w / 2.0) + 2.0 * log_n + profile.lambda_(2.0) * inp.j
        breakdown = {"W_hat": w, "theta": 2.0}
        if regime == "IIB":
            log_phi = float(log_ndtr(-inp.b * math.sqrt(inp.a / profile.d2lambda(2.0))))
            log_value += log_phi
            breakdown["phi_factor"] = math.exp(log_phi)
        return Prediction(
            value=math.exp(log_value),
            log_value=log_value,
            form="deficit",
            regime=regime,
            theta=2.0,
            breakdown=breakdown,
            approximate=inp.w_approximate,
        )
    if regime == "III":
        fraction = float(ndtr(-inp.b * math.sqrt(inp.a / profile.d2lambda(1.0))))
        return Prediction(
            value=fraction,
            log_value=math.log(fraction) if fraction > 0 else -math.inf,
            form="fraction",
            regime=regime,
            theta=1.0,
            breakdown={"phi_factor": fraction},
        )
    if regime in _TEMPLATE_REGIMES:
        log_value, theta, breakdown = _template_log(inp, log_n)
        return Prediction(
            value=math.exp(log_value),
            log_value=log_value,
            form="deficit" if regime == "IIC" else "count",
            regime=regime,
            theta=theta,
            breakdown=breakdown,
            approximate=inp.w_approximate,
        )
    raise InadmissibleRegimeError(f"No prediction for regime {regime!r}")


@dataclass(frozen=True)
class PoissonizedPrediction:
    """Quenched leading-order mean and variance at Poisson intensity t.

    Attributes:
        mean: Leading-order conditional mean of the predicted quantity.
        variance: Leading-order conditional variance.
        y: Offset log t - a j (log t + lambda'(k) j for the at-least-k form).
        form: "deficit" or "count".
        regime: Regime of the formula.
        theta: theta of the formula.
    """

    mean: float
    variance: float
    y: float
    form: PredictionForm
    regime: RegimeLabel
    theta: float


def _gauss_density(y: float, curvature: float) -> float:
    return math.exp(-(y**2) / (2.0 * curvature)) / math.sqrt(2.0 * math.pi * curvature)


def predict_poissonized(inp: PredictionInput) -> PoissonizedPrediction:
    """Finite-level Poissonized forms at intensity t = ``inp.n``.

    With y = log t - a j, the deficit N_t - K_t (IIA, IIB, IIC), the count
    K_t (IV), the count K_t(k) (saturation) and the empty-box count L_t
    (Freezing) are compared against W_hat times explicit functions of (t, j, y).

    Raises:
        InadmissibleRegimeError: For regime I (use ``collision_bound``) or an
            inadmissible regime.
    """
    _check_admissible(inp)
    profile = inp.profile
    log_t = math.log(inp.n)
    j = inp.j
    if inp.k >= 2 or inp.regime == "III":
        k = float(inp.k)
        slope = profile.dlambda(k)
        y = log_t + slope * j
        w = 1.0 if inp.k == 1 else lookup_w_hat(inp.w_hat, k)
        rate = profile.lambda_(k) - k * slope
        factor = float(ndtr(-y / math.sqrt(j * profile.d2lambda(k))))
        mean = math.exp(rate * j + y - float(gammaln(k + 1.0))) * w * factor
        return PoissonizedPrediction(mean, mean, y, "count", "III", k)
    y = log_t - inp.a * j
    if inp.regime in ("IIA", "IIB"):
        w = lookup_w_hat(inp.w_hat, 2.0)
        mean = 0.5 * w * math.exp(2.0 * log_t + profile.lambda_(2.0) * j)
        if inp.regime == "IIB":
            mean *= float(ndtr(-y / math.sqrt(profile.d2lambda(2.0) * j)))
        return PoissonizedPrediction(mean, mean, y, "deficit", inp.regime, 2.0)
    if inp.regime in _TEMPLATE_REGIMES:
        theta = solve_theta_for_slope(profile, inp.a)
        if not _theta_window(inp.regime, theta):
            raise InadmissibleRegimeError(
                f"theta={theta:.6g} is outside the {inp.regime} window"
            )
        w = lookup_w_hat(inp.w_hat, theta)
        density = _gauss_density(y / math.sqrt(j), profile.d2lambda(theta))
        mean = (
            template_coefficient(inp.regime, theta)
            * w
            * density
            * math.exp(theta * log_t + profile.lambda_(theta) * j)
            / math.sqrt(j)
        )
        if inp.regime == "IIC":
            var_factor = 2.0 * theta - 2.0**theta + 1.0
        elif inp.regime == "IV":
            var_factor = 2.0**theta - 1.0
        else:
            var_factor = 1.0 - 2.0**theta
        form: PredictionForm = "deficit" if inp.regime == "IIC" else "count"
        return PoissonizedPrediction(mean, var_factor * mean, y, form, inp.regime, theta)
    raise InadmissibleRegimeError(
        f"No Poissonized leading-order form for regime {inp.regime!r}; use collision_bound"
    )


@dataclass(frozen=True)
class CollisionBound:
    """Expected collisions at a very-low-density intensity.

    Attributes:
        t: Intensity exp(a_* j - eps sqrt(j)).
        expected_collisions: E[K_t(2) | tree] = sum phi_2(t e^{-V(u)}).
        bound: exp(-2 eps sqrt(j)) W_j(2).
        bound_valid: Whether theta* >= 2, where the bound is proven.
    """

    t: float
    expected_collisions: float
    bound: float
    bound_valid: bool


def collision_bound(
    tree: WeightedTree,
    j: int,
    eps: float,
    profile: SpectralProfile,
    constants: CriticalConstants,
) -> CollisionBound:
    """Compare E K_t(2) with its martingale bound at t_j = exp(a_* j - eps sqrt(j))."""
    if not eps > 0:
        raise DomainError(f"eps must be positive, got {eps!r}")
    log_t = constants.a_star * j - eps * math.sqrt(j)
    t = math.exp(log_t)
    expected = float(phi(t * tree.level(j).weight, 2).sum())
    w2 = martingale(tree, 2.0, j, profile).value
    return CollisionBound(
        t=t,
        expected_collisions=expected,
        bound=math.exp(-2.0 * eps * math.sqrt(j)) * w2,
        bound_valid=constants.theta_star >= 2.0,
    )


@dataclass(frozen=True)
class Comparison:
    """Observed versus predicted.

    Attributes:
        observed: Observed value.
        predicted: Predicted value.
        absolute_error: |observed - predicted|.
        relative_error: absolute_error / predicted, None when predicted is 0.
        log_ratio: log(observed / predicted), None unless both are positive.
        exact_match: Whether observed equals predicted exactly.
    """

    observed: float
    predicted: float
    absolute_error: float
    relative_error: float | None
    log_ratio: float | None
    exact_match: bool


def observed_quantity(prediction: Prediction, counts: OccupancyCounts, n: float) -> float:
    """Pick the observed statistic matching a prediction's form.

    n - K(1) for deficits, K(1)/n for fractions, K(k) for at-least-k counts,
    L for Freezing and K(1) otherwise.

    Raises:
        ConfigurationError: If Freezing is compared without an empty-box count.
    """
    k1 = counts.K[1]
    if prediction.form == "deficit":
        return n - k1
    if prediction.form == "fraction":
        return k1 / n
    if prediction.regime == "Freezing":
        if counts.L is None:
            raise ConfigurationError("Freezing comparison needs the empty-box count L")
        return float(counts.L)
    if prediction.form == "count" and prediction.k >= 2:
        return float(counts.K[prediction.k])
    return float(k1)


def compare(prediction: Prediction, observed: float) -> Comparison:
    """Relative error, absolute error and log ratio of an observation."""
    predicted = prediction.value
    abs_err = abs(observed - predicted)
    rel = abs_err / predicted if predicted > 0 else None
    log_ratio = math.log(observed / predicted) if observed > 0 and predicted > 0 else None
    return Comparison(
        observed=float(observed),
        predicted=float(predicted),
        absolute_error=abs_err,
        relative_error=rel,
        log_ratio=log_ratio,
        exact_match=observed == predicted,
    )


@dataclass(frozen=True)
class WHat:
    """Estimated martingale limits.

    Attributes:
        values: W_J(theta) per theta.
        level: Level J the values were read at.
        approximate: Whether any value is flagged approximate.
    """

    values: dict[float, float]
    level: int
    approximate: bool


def estimate_w_hat(
    tree: WeightedTree, thetas: tuple[float, ...] | list[float], profile: SpectralProfile
) -> WHat:
    """Read W_J(theta) at the deepest exactly materialized level.

    Trees of infinite environments have no exact level below the root; the
    deepest level is used instead and the flags of ``martingale`` apply.
    """
    level = tree.deepest_exact_level()
    if level == 0:
        level = tree.depth
    values = {float(theta): martingale(tree, theta, level, profile) for theta in thetas}
    approximate = any(mv.approximate for mv in values.values())
    if approximate:
        logger.debug("W_hat at level %d carries truncation error", level)
    return WHat(
        values={theta: mv.value for theta, mv in values.items()},
        level=level,
        approximate=approximate,
    )


def log_slope(xs: ArrayLike, ys: ArrayLike) -> float:
    """Least-squares slope of log(ys) on log(xs)."""
    return float(np.polyfit(np.log(xs), np.log(ys), 1)[0])
