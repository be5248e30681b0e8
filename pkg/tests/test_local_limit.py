"""Tests for the Gibbs-measure limit checks."""

from __future__ import annotations

import math

import numpy as np
import pytest
from scipy.integrate import quad

from nestocc import (
    DomainError,
    EnvironmentSpec,
    LatticeEnvironmentError,
    check_clt_tail,
    check_local_limit,
    check_renewal_sum,
    materialize_tree,
)
from nestocc.local_limit import kernel_integral, kernel_values
from nestocc.tree import WeightedTree


@pytest.fixture
def deep_tree(dirichlet: EnvironmentSpec) -> WeightedTree:
    return materialize_tree(dirichlet, 12, seed=21)


def test_local_limit_grid_shape(deep_tree: WeightedTree) -> None:
    res = check_local_limit(deep_tree, 1.0, 12, [0.25, 0.5, 1.0], np.linspace(-2, 2, 5))
    assert res.lhs.shape == res.rhs.shape == (15,)
    assert res.sup_discrepancy == pytest.approx(float(np.abs(res.lhs - res.rhs).max()))
    assert res.exact_level
    assert np.all(res.lhs >= 0)


def test_local_limit_rhs_is_gaussian(deep_tree: WeightedTree) -> None:
    res = check_local_limit(deep_tree, 1.0, 12, [0.5], [0.0])
    # lambda''(1) = 1/4 for DirichletSplit(2, 1), and W_j(1) = 1.
    expected = 2 * 0.5 / math.sqrt(2 * math.pi * 0.25)
    assert res.rhs[0] == pytest.approx(expected)


def test_lattice_is_refused(half_split: EnvironmentSpec) -> None:
    tree = materialize_tree(half_split, 4)
    with pytest.raises(LatticeEnvironmentError):
        check_local_limit(tree, 1.0, 4, [0.5], [0.0])


def test_theta_window_is_enforced(deep_tree: WeightedTree) -> None:
    with pytest.raises(DomainError, match="theta"):
        check_local_limit(deep_tree, 4.0, 12, [0.5], [0.0])
    with pytest.raises(DomainError):
        check_clt_tail(deep_tree, -0.9, 12, [0.0], delta=0.1)


def test_tail_far_left_recovers_martingale(deep_tree: WeightedTree) -> None:
    corollary = check_clt_tail(deep_tree, 1.0, 12, [-1e6], delta=0.25)
    assert corollary.sup_discrepancy == pytest.approx(0.0, abs=1e-12)
    proposition = check_clt_tail(deep_tree, 1.0, 12, [-1e6], mode="proposition")
    assert proposition.sup_discrepancy == pytest.approx(0.0, abs=1e-12)


def test_tail_far_right_is_empty(deep_tree: WeightedTree) -> None:
    res = check_clt_tail(deep_tree, 1.0, 12, [1e6], delta=0.25)
    assert res.lhs[0] == 0.0
    assert res.rhs[0] == pytest.approx(1.0)


def test_tail_corollary_needs_delta(deep_tree: WeightedTree) -> None:
    with pytest.raises(DomainError, match="delta"):
        check_clt_tail(deep_tree, 1.0, 12, [0.0])
    with pytest.raises(DomainError, match="delta"):
        check_clt_tail(deep_tree, 1.0, 12, [0.0], delta=0.75)


def test_kernel_integrals() -> None:
    assert kernel_integral("indicator", 1.0) == 1.0
    assert kernel_integral("exp_kernel_m", 1.5) == pytest.approx(math.sqrt(math.pi) / 0.75)
    assert kernel_integral("exp_kernel_phi", 0.5) == pytest.approx(2 * math.sqrt(math.pi))
    assert kernel_integral("exp_kernel_phi", 1.5, k=2) == pytest.approx(
        math.gamma(0.5) / 1.5
    )
    with pytest.raises(DomainError):
        kernel_integral("exp_kernel_m", 0.5)
    with pytest.raises(DomainError):
        kernel_integral("exp_kernel_phi", 1.0, k=1)


@pytest.mark.parametrize(
    ("kernel", "theta", "k"), [("exp_kernel_m", 1.5, 1), ("exp_kernel_phi", 0.5, 1)]
)
def test_kernel_values_integrate_to_closed_form(kernel: str, theta: float, k: int) -> None:
    total = 0.0
    for lo, hi in ((-80.0, -30.0), (-30.0, 0.0), (0.0, 80.0)):
        value, _ = quad(lambda x: float(kernel_values(kernel, x, theta, k)), lo, hi, limit=200)  # type: ignore[arg-type]
        total += value
    assert total == pytest.approx(kernel_integral(kernel, theta, k), rel=1e-5)  # type: ignore[arg-type]


def test_kernel_asymptote_is_continuous() -> None:
    left = kernel_values("exp_kernel_m", -30.0001, 1.5)
    right = kernel_values("exp_kernel_m", -29.9999, 1.5)
    assert float(left) == pytest.approx(float(right), rel=1e-3)


def test_renewal_sum(deep_tree: WeightedTree) -> None:
    res = check_renewal_sum(deep_tree, 1.0, 12, "exp_kernel_phi", [-1.0, 0.0, 1.0], k=2)
    assert res.lhs.shape == (3,)
    assert np.all(np.isfinite(res.lhs))
    assert np.all(res.rhs > 0)
    with pytest.raises(DomainError):
        check_renewal_sum(deep_tree, 1.0, 12, "exp_kernel_m", [0.0])
