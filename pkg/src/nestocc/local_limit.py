"""Empirical checks of the Gibbs-measure limit theorems on a materialized level.

Write w(u) = exp(-theta V(u) - lambda(theta) j) for |u| = j, so that
sum w(u) = W_j(theta), and let g_theta be the centered Gaussian density with
variance lambda''(theta). Three families of finite-j discrepancies are
evaluated, each with W_j(theta) standing in for its limit W(theta):

    - local limit: sqrt(j) sum w(u) 1{V(u) in (x - lambda' j - h, x - lambda' j + h]}
      against 2 h W g_theta(x / sqrt(j))
    - renewal sums: sqrt(j) sum w(u) f(-lambda' j + y - V(u)) against
      W g_theta(y / sqrt(j)) times the integral of f
    - left tails: sum w(u) 1{V(u) >= delta j + y} against W, or the
      Gaussian-smoothed tail against W Phi(-y / sqrt(lambda''))

All checks refuse lattice environments and theta outside (theta_*, theta*).
"""

from __future__ import annotations

import math
from collections.abc import Sequence
from dataclasses import dataclass

import numpy as np
from numpy.typing import ArrayLike, NDArray
from scipy.special import gammaln, ndtr

from .exceptions import DomainError, LatticeEnvironmentError
from .kernels import m_kernel, phi
from .spectral import CriticalConstants, SpectralProfile, build_profile, critical_constants
from .tree import WeightedTree
from .types import RenewalKernel, TailMode

FloatArray = NDArray[np.float64]

_ASYMPTOTIC_BELOW = -30.0


@dataclass(frozen=True)
class Discrepancy:
    """Outcome of one limit-theorem check.

    Attributes:
        sup_discrepancy: Largest absolute difference over the grid.
        lhs: Empirical side on the grid (flattened for two-dimensional grids).
        rhs: Limit side on the grid.
        exact_level: Whether the level carries no truncated mass.
    """

    sup_discrepancy: float
    lhs: FloatArray
    rhs: FloatArray
    exact_level: bool


@dataclass(frozen=True)
class _GibbsLevel:
    positions: FloatArray  # sorted
    cumweight: FloatArray  # cumulative weights aligned with positions, leading 0
    total: float
    slope: float  # lambda'(theta)
    curvature: float  # lambda''(theta)
    exact: bool

    def mass_in(self, lo: FloatArray, hi: FloatArray) -> FloatArray:
        """Gibbs mass of (lo, hi]."""
        i_hi = np.searchsorted(self.positions, hi, side="right")
        i_lo = np.searchsorted(self.positions, lo, side="right")
        return np.asarray(self.cumweight[i_hi] - self.cumweight[i_lo], dtype=np.float64)

    def mass_at_least(self, x: FloatArray) -> FloatArray:
        """Gibbs mass of [x, inf)."""
        idx = np.searchsorted(self.positions, x, side="left")
        return np.asarray(self.total - self.cumweight[idx], dtype=np.float64)


def _prepare(
    tree: WeightedTree,
    theta: float,
    j: int,
    profile: SpectralProfile | None,
    constants: CriticalConstants | None,
) -> tuple[_GibbsLevel, FloatArray]:
    profile = profile or build_profile(tree.env)
    if profile.lattice:
        raise LatticeEnvironmentError("Local limit checks need a nonlattice environment")
    constants = constants or critical_constants(profile)
    if not constants.theta_sub < theta < constants.theta_star:
        raise DomainError(
            f"theta={theta!r} must lie in (theta_*={constants.theta_sub:.6g}, "
            f"theta*={constants.theta_star:.6g})"
        )
    level = tree.level(j)
    order = np.argsort(level.position, kind="stable")
    positions = level.position[order]
    weights = np.exp(-theta * positions - profile.lambda_(theta) * j)
    cumweight = np.concatenate([[0.0], np.cumsum(weights)])
    gibbs = _GibbsLevel(
        positions=positions,
        cumweight=cumweight,
        total=float(cumweight[-1]),
        slope=profile.dlambda(theta),
        curvature=profile.d2lambda(theta),
        exact=level.exact,
    )
    return gibbs, weights


def _density(y: FloatArray, curvature: float) -> FloatArray:
    return np.exp(-(y**2) / (2.0 * curvature)) / math.sqrt(2.0 * math.pi * curvature)


def check_local_limit(
    tree: WeightedTree,
    theta: float,
    j: int,
    h_grid: ArrayLike,
    x_grid: ArrayLike,
    profile: SpectralProfile | None = None,
    constants: CriticalConstants | None = None,
) -> Discrepancy:
    """Local limit of the Gibbs measure on a grid of half-widths h and centers x.

    Raises:
        LatticeEnvironmentError: For lattice environments.
        DomainError: If theta is not in (theta_*, theta*).
    """
    gibbs, _ = _prepare(tree, theta, j, profile, constants)
    h = np.atleast_1d(np.asarray(h_grid, dtype=np.float64))[:, None]
    x = np.atleast_1d(np.asarray(x_grid, dtype=np.float64))[None, :]
    center = x - gibbs.slope * j
    lhs = math.sqrt(j) * gibbs.mass_in(center - h, center + h)
    rhs = 2.0 * h * gibbs.total * _density(x / math.sqrt(j), gibbs.curvature)
    lhs, rhs = np.broadcast_arrays(lhs, rhs)
    diff = np.abs(lhs - rhs)
    return Discrepancy(
        sup_discrepancy=float(diff.max()) if diff.size else 0.0,
        lhs=lhs.reshape(-1).copy(),
        rhs=rhs.reshape(-1).copy(),
        exact_level=gibbs.exact,
    )


def kernel_integral(kernel: RenewalKernel, theta: float, k: int = 1) -> float:
    """Closed-form integral of a renewal test function over the real line.

    indicator of [0, 1): 1; e^{-theta x} m(e^x): Gamma(2-theta)/(theta(theta-1))
    for theta in (1, 2); e^{-theta x} phi_k(e^x): Gamma(k-theta)/(theta Gamma(k))
    for theta in (0, k).

    Raises:
        DomainError: If theta is outside the kernel's validity range.
    """
    if kernel == "indicator":
        return 1.0
    if kernel == "exp_kernel_m":
        if not 1.0 < theta < 2.0:
            raise DomainError(f"m-kernel needs theta in (1, 2), got {theta!r}")
        return math.exp(float(gammaln(2.0 - theta))) / (theta * (theta - 1.0))
    if kernel == "exp_kernel_phi":
        if not 0.0 < theta < k:
            raise DomainError(f"phi_{k}-kernel needs theta in (0, {k}), got {theta!r}")
        return math.exp(float(gammaln(k - theta)) - float(gammaln(k))) / theta
    raise DomainError(f"Unknown renewal kernel: {kernel!r}")


def kernel_values(kernel: RenewalKernel, x: ArrayLike, theta: float, k: int = 1) -> FloatArray:
    """Evaluate a renewal test function, using its small-argument asymptote far left."""
    arr = np.asarray(x, dtype=np.float64)
    if kernel == "indicator":
        return ((arr >= 0.0) & (arr < 1.0)).astype(np.float64)
    far = arr < _ASYMPTOTIC_BELOW
    safe = np.where(far, 0.0, arr)
    if kernel == "exp_kernel_m":
        direct = np.exp(-theta * safe) * m_kernel(np.exp(safe))
        tail = np.exp((2.0 - theta) * arr - math.log(2.0))
    else:
        direct = np.exp(-theta * safe) * phi(np.exp(safe), k)
        tail = np.exp((k - theta) * arr - float(gammaln(k + 1.0)))
    return np.where(far, tail, direct)


def check_renewal_sum(
    tree: WeightedTree,
    theta: float,
    j: int,
    kernel: RenewalKernel,
    y_grid: ArrayLike,
    *,
    k: int = 1,
    profile: SpectralProfile | None = None,
    constants: CriticalConstants | None = None,
) -> Discrepancy:
    """Renewal-type sums of a directly integrable test function.

    Raises:
        DomainError: If theta is outside (theta_*, theta*) or the kernel's range.
        LatticeEnvironmentError: For lattice environments.
    """
    integral = kernel_integral(kernel, theta, k)
    gibbs, _ = _prepare(tree, theta, j, profile, constants)
    weights = np.diff(gibbs.cumweight)
    y = np.atleast_1d(np.asarray(y_grid, dtype=np.float64))
    shifted = -gibbs.slope * j - gibbs.positions
    lhs = math.sqrt(j) * np.array(
        [float(np.dot(weights, kernel_values(kernel, shifted + yy, theta, k))) for yy in y]
    )
    rhs = gibbs.total * _density(y / math.sqrt(j), gibbs.curvature) * integral
    diff = np.abs(lhs - rhs)
    return Discrepancy(
        sup_discrepancy=float(diff.max()) if diff.size else 0.0,
        lhs=lhs,
        rhs=rhs,
        exact_level=gibbs.exact,
    )


def check_clt_tail(
    tree: WeightedTree,
    theta: float,
    j: int,
    y_grid: Sequence[float] | ArrayLike,
    *,
    delta: float | None = None,
    mode: TailMode = "corollary",
    profile: SpectralProfile | None = None,
    constants: CriticalConstants | None = None,
) -> Discrepancy:
    """Left-tail sums of the Gibbs measure.

    In "corollary" mode the mass of {V(u) >= delta j + y} is compared with
    W_j(theta); delta must lie in (0, -lambda'(theta)) and y is on the scale
    sqrt(j). In "proposition" mode the mass of {V(u) >= -lambda' j + y sqrt(j)}
    is compared with W_j(theta) Phi(-y / sqrt(lambda''(theta))), y bounded.

    Raises:
        DomainError: If delta is missing or out of range in corollary mode.
    """
    gibbs, _ = _prepare(tree, theta, j, profile, constants)
    y = np.atleast_1d(np.asarray(y_grid, dtype=np.float64))
    if mode == "corollary":
        if delta is None or not 0.0 < delta < -gibbs.slope:
            raise DomainError(
                f"delta must lie in (0, -lambda'(theta)={-gibbs.slope:.6g}), got {delta!r}"
            )
        lhs = gibbs.mass_at_least(delta * j + y)
        rhs = np.full(y.shape, gibbs.total)
    elif mode == "proposition":
        lhs = gibbs.mass_at_least(-gibbs.slope * j + y * math.sqrt(j))
        rhs = gibbs.total * ndtr(-y / math.sqrt(gibbs.curvature))
    else:
        raise DomainError(f"Unknown tail mode: {mode!r}")
    diff = np.abs(lhs - rhs)
    return Discrepancy(
        sup_discrepancy=float(diff.max()) if diff.size else 0.0,
        lhs=np.asarray(lhs, dtype=np.float64),
        rhs=np.asarray(rhs, dtype=np.float64),
        exact_level=gibbs.exact,
    )
