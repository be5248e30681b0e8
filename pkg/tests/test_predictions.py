"""Tests for the leading-order predictions."""

from __future__ import annotations

import math
from dataclasses import replace

import numpy as np
import pytest

from nestocc import (
    ConfigurationError,
    EnvironmentSpec,
    InadmissibleRegimeError,
    PredictionInput,
    build_profile,
    collision_bound,
    compare,
    critical_constants,
    estimate_w_hat,
    level_for,
    predict,
    predict_at_least_k,
    predict_poissonized,
)
from nestocc.occupancy import OccupancyCounts
from nestocc.predictions import (
    log_slope,
    observed_quantity,
    prediction_thetas,
    realized_offset,
    template_coefficient,
)
from nestocc.spectral import SpectralProfile
from nestocc.tree import WeightedTree


@pytest.fixture
def sieve_profile(uniform_sieve: EnvironmentSpec) -> SpectralProfile:
    return build_profile(uniform_sieve)


def _input(profile: SpectralProfile, **kwargs: object) -> PredictionInput:
    return PredictionInput(profile=profile, constants=critical_constants(profile), **kwargs)  # type: ignore[arg-type]


def test_level_for() -> None:
    assert level_for(1e5, 0.5) == 23
    assert level_for(1e5, 1.5) == 8
    assert level_for(1e4, 0.45) == 20
    with pytest.raises(ConfigurationError):
        level_for(1e5, 0.0)
    with pytest.raises(ConfigurationError):
        level_for(1.0, 0.5)


def test_realized_offset_inverts_level_rule() -> None:
    n, a = 1e6, 0.5
    j = level_for(n, a, b=0.3)
    assert abs(realized_offset(n, j, a) - 0.3) <= a / math.sqrt(math.log(n))


def test_regime_one_predicts_every_ball_alone(sieve_profile: SpectralProfile) -> None:
    pred = predict(_input(sieve_profile, regime="I", n=1000.0, j=35, a=0.2))
    assert pred.value == 1000.0
    assert pred.form == "exact_n"


def test_regime_two_deficit(sieve_profile: SpectralProfile) -> None:
    inp = _input(sieve_profile, regime="IIA", n=1e4, j=20, a=0.45, w_hat={2.0: 1.3})
    pred = predict(inp)
    expected = 0.5 * 1.3 * 1e8 * 2.0**-20
    assert pred.value == pytest.approx(expected, rel=1e-12)
    assert pred.form == "deficit"
    assert pred.theta == 2.0


def test_regime_two_boundary_halves_at_zero_offset(sieve_profile: SpectralProfile) -> None:
    inp = _input(sieve_profile, regime="IIB", n=1e4, j=18, a=0.5, b=0.0, w_hat={2.0: 1.0})
    pred = predict(inp)
    assert pred.value == pytest.approx(0.25 * 1e8 * 2.0**-18, rel=1e-12)
    assert pred.breakdown["phi_factor"] == pytest.approx(0.5)


def test_regime_three_fraction(sieve_profile: SpectralProfile) -> None:
    pred = predict(_input(sieve_profile, regime="III", n=1e5, j=12, a=1.0, b=0.0))
    assert pred.value == pytest.approx(0.5)
    assert pred.form == "fraction"
    shifted = predict(_input(sieve_profile, regime="III", n=1e5, j=12, a=1.0, b=1.0))
    assert shifted.value < 0.5


def test_template_for_regime_iic(sieve_profile: SpectralProfile) -> None:
    theta = 4 / 3
    n, j = 1e6, 18
    inp = _input(sieve_profile, regime="IIC", n=n, j=j, a=0.75)
    pred = predict(replace(inp, w_hat={prediction_thetas(inp)[0]: 0.9}))
    coeff = math.gamma(2 - theta) / (theta * (theta - 1))
    gauss = 1 / math.sqrt(2 * math.pi / theta**2)
    expected = coeff * gauss * 0.9 * n**theta * math.exp(-math.log(theta) * j) / math.sqrt(j)
    assert pred.value == pytest.approx(expected, rel=1e-8)
    assert pred.theta == pytest.approx(theta)
    assert pred.breakdown["coefficient"] == pytest.approx(coeff)


def test_template_coefficients() -> None:
    assert template_coefficient("IV", 0.5) == pytest.approx(math.gamma(0.5) / 0.5)
    assert template_coefficient("Freezing", -1 / 3) == pytest.approx(math.gamma(1 / 3))
    assert template_coefficient("IIC", 1.5) == pytest.approx(math.gamma(0.5) / 0.75)


def test_freezing_prediction(dirichlet: EnvironmentSpec) -> None:
    profile = build_profile(dirichlet)
    inp = _input(profile, regime="Freezing", n=1e5, j=8, a=1.5)
    thetas = prediction_thetas(inp)
    assert thetas == pytest.approx((-1 / 3,))
    pred = predict(replace(inp, w_hat={thetas[0]: 1.0}))
    assert pred.form == "count"
    assert pred.value > 0
    assert pred.theta == pytest.approx(-1 / 3)


def test_inadmissible_regimes(sieve_profile: SpectralProfile) -> None:
    with pytest.raises(InadmissibleRegimeError, match="classifies as IIC"):
        predict(_input(sieve_profile, regime="IIA", n=1e4, j=20, a=0.75, w_hat={2.0: 1.0}))
    with pytest.raises(InadmissibleRegimeError):
        predict(_input(sieve_profile, regime="I", n=1e4, j=0, a=0.2))
    with pytest.raises(InadmissibleRegimeError, match="At-least-k"):
        predict(_input(sieve_profile, regime="III", n=1e4, j=9, a=1.0, k=3, w_hat={3.0: 1.0}))


def test_missing_w_hat(sieve_profile: SpectralProfile) -> None:
    with pytest.raises(ConfigurationError, match="W_hat is missing"):
        predict(_input(sieve_profile, regime="IIA", n=1e4, j=20, a=0.45))


def test_at_least_k_reduces_to_regime_three(sieve_profile: SpectralProfile) -> None:
    pred = predict_at_least_k(_input(sieve_profile, regime="III", n=1e5, j=12, a=1.0))
    assert pred.value == pytest.approx(0.5e5)
    two = predict(_input(sieve_profile, regime="III", n=1e5, j=23, a=0.5, k=2, w_hat={2.0: 1.0}))
    assert two.k == 2
    assert two.theta == 2.0


def test_poissonized_deficit(sieve_profile: SpectralProfile) -> None:
    inp = _input(sieve_profile, regime="IIA", n=1e4, j=20, a=0.45, w_hat={2.0: 1.0})
    pois = predict_poissonized(inp)
    assert pois.mean == pytest.approx(0.5 * 1e8 * 2.0**-20)
    assert pois.variance == pois.mean
    assert pois.y == pytest.approx(math.log(1e4) - 0.45 * 20)
    with pytest.raises(InadmissibleRegimeError, match="collision_bound"):
        predict_poissonized(_input(sieve_profile, regime="I", n=1e4, j=40, a=0.2))


def test_poissonized_template_variance(dirichlet: EnvironmentSpec) -> None:
    profile = build_profile(dirichlet)
    inp = _input(profile, regime="IV", n=1e4, j=12, a=0.75)
    theta = prediction_thetas(inp)[0]
    assert theta == pytest.approx(1 / 3)
    pois = predict_poissonized(replace(inp, w_hat={theta: 1.0}))
    assert pois.variance == pytest.approx((2**theta - 1) * pois.mean)


def test_collision_bound(sieve_tree: WeightedTree, sieve_profile: SpectralProfile) -> None:
    constants = critical_constants(sieve_profile)
    res = collision_bound(sieve_tree, 4, 0.5, sieve_profile, constants)
    assert res.t == pytest.approx(math.exp(constants.a_star * 4 - 0.5 * 2))
    assert res.bound_valid
    assert res.expected_collisions >= 0


def test_compare_and_observed_quantity(sieve_profile: SpectralProfile) -> None:
    pred = predict(_input(sieve_profile, regime="IIA", n=100.0, j=10, a=0.45, w_hat={2.0: 1.0}))
    counts = OccupancyCounts(j=10, K={1: 97, 2: 3}, excess=0)
    observed = observed_quantity(pred, counts, 100.0)
    assert observed == 3.0
    cmp = compare(pred, observed)
    assert cmp.absolute_error == pytest.approx(abs(3.0 - pred.value))
    assert cmp.relative_error == pytest.approx(cmp.absolute_error / pred.value)
    assert not cmp.exact_match


def test_freezing_comparison_needs_empty_boxes(dirichlet: EnvironmentSpec) -> None:
    profile = build_profile(dirichlet)
    inp = _input(profile, regime="Freezing", n=1e5, j=8, a=1.5)
    pred = predict(replace(inp, w_hat=dict.fromkeys(prediction_thetas(inp), 1.0)))
    with pytest.raises(ConfigurationError, match="empty-box count"):
        observed_quantity(pred, OccupancyCounts(j=8, K={1: 200}, excess=0), 1e5)


def test_estimate_w_hat(dirichlet_tree: WeightedTree, dirichlet: EnvironmentSpec) -> None:
    w = estimate_w_hat(dirichlet_tree, [1.0, 2.0], build_profile(dirichlet))
    assert w.level == dirichlet_tree.depth
    assert w.values[1.0] == pytest.approx(1.0)
    assert not w.approximate


def test_log_slope() -> None:
    xs = np.array([1e2, 1e3, 1e4])
    assert log_slope(xs, 3 * xs**0.5) == pytest.approx(0.5)
