"""Spectral apparatus of a random environment.

lambda(theta) = log E sum_k P_k^theta is strictly convex and decreasing with
lambda(1) = 0. Everything the occupancy predictions need derives from it:

    - theta*: root of theta lambda'(theta) - lambda(theta) on (1, inf)
    - v = -lambda(theta*) / theta*: speed of the branching random walk
    - theta_*: the counterpart of theta* on the negative half-line
    - thresholds a_*, a_c, a-bar and a-bar-minus on the ball density a
    - the Legendre transform lambda*(a) and the deficit exponent alpha(a)
    - the density regime of a level with ball density a

All roots are found by bisection on monotone brackets.
"""

from __future__ import annotations

import logging
import math
from collections.abc import Callable
from dataclasses import dataclass, field

import numpy as np
from scipy.interpolate import CubicSpline
from scipy.optimize import bisect

from .config import get_config
from .environment import (
    EnvironmentSpec,
    MonteCarloEstimate,
    closed_form_spectral,
    mc_log_laplace_grid,
)
from .exceptions import (
    ConfigurationError,
    DomainError,
    LatticeEnvironmentError,
    NoThetaStarError,
    SlopeOutOfRangeError,
)
from .rng import ENVIRONMENT, stream
from .types import RegimeLabel, SpectralProperty, SpectralSource

logger = logging.getLogger(__name__)

BOUNDARY_OFFSET = 1e-6
"""Offset from the domain boundary at which a-bar is evaluated."""

SUB_OFFSET = 1e-8
"""Offset from theta_* at which a-bar-minus is evaluated."""

_MAX_ITERATIONS = 400


@dataclass(frozen=True)
class MonteCarloConfig:
    """Monte Carlo fallback settings for environments without closed forms.

    Attributes:
        theta_min: Smallest grid point, strictly above underline-theta.
        theta_max: Largest grid point.
        step: Grid spacing in theta (config default when None).
        samples: Fragmentations per grid (config default when None).
        seed: Master seed of the estimation stream.
        mass_floor: Stick-breaking truncation floor (config default when None).
    """

    theta_min: float = 0.25
    theta_max: float = 6.0
    step: float | None = None
    samples: int | None = None
    seed: int = 0
    mass_floor: float | None = None

    def grid(self) -> np.ndarray:
        """Return the theta grid."""
        step = self.step or get_config().mc_grid_step
        if step <= 0 or self.theta_max <= self.theta_min:
            raise ConfigurationError(
                f"Invalid Monte Carlo grid: [{self.theta_min}, {self.theta_max}] step {step}"
            )
        count = int(round((self.theta_max - self.theta_min) / step)) + 1
        return np.linspace(self.theta_min, self.theta_min + (count - 1) * step, count)


@dataclass(frozen=True)
class SpectralProfile:
    """Evaluators of lambda and its derivatives.

    Attributes:
        lambda_: theta -> lambda(theta).
        dlambda: theta -> lambda'(theta).
        d2lambda: theta -> lambda''(theta).
        theta_lower: underline-theta, the left end of the domain of lambda.
        lattice: Whether the environment is lattice.
        source: "closed_form" or "monte_carlo".
        theta_upper: Right end of the evaluated domain (grid end for Monte Carlo).
        domain_min: Left end of the evaluated domain (grid start for Monte Carlo).
        grid: Monte Carlo theta grid, empty for closed forms.
        samples: Monte Carlo sample size, 0 for closed forms.
        estimates: Monte Carlo estimates behind the spline.
    """

    lambda_: Callable[[float], float]
    dlambda: Callable[[float], float]
    d2lambda: Callable[[float], float]
    theta_lower: float
    lattice: bool
    source: SpectralSource
    theta_upper: float = math.inf
    domain_min: float | None = None
    grid: tuple[float, ...] = ()
    samples: int = 0
    estimates: tuple[MonteCarloEstimate, ...] = field(default=(), repr=False)

    @property
    def left_end(self) -> float:
        """Smallest theta at which the evaluators may be called."""
        if self.domain_min is not None:
            return self.domain_min
        return self.theta_lower

    def in_domain(self, theta: float) -> bool:
        """Whether theta lies in the evaluated domain."""
        if self.domain_min is not None:
            return self.domain_min <= theta <= self.theta_upper
        return self.theta_lower < theta <= self.theta_upper

    @property
    def spectral_property(self) -> SpectralProperty:
        """Property A when lambda(0) is infinite, property B when underline-theta < 0."""
        return "B" if self.theta_lower < 0 else "A"


def _mc_profile(spec: EnvironmentSpec, mc: MonteCarloConfig) -> SpectralProfile:
    theta_lower = spec.theta_lower
    grid = mc.grid()
    if grid[0] <= theta_lower:
        raise DomainError(
            f"Monte Carlo grid starts at {grid[0]:g}, not above underline-theta={theta_lower:g}"
        )
    samples = mc.samples or get_config().mc_samples
    rng = stream(mc.seed, ENVIRONMENT)
    estimates = mc_log_laplace_grid(spec, grid, samples, rng, mc.mass_floor)
    flagged = [e.theta for e in estimates if e.flagged]
    if flagged:
        logger.warning("Monte Carlo lambda flagged at theta=%s", flagged)
    spline = CubicSpline(grid, [e.estimate for e in estimates])
    h = float(grid[1] - grid[0]) / 4.0 if grid.size > 1 else 1e-3
    lo, hi = float(grid[0]), float(grid[-1])

    def check(theta: float) -> None:
        if not lo <= theta <= hi:
            raise DomainError(f"theta={theta!r} outside the Monte Carlo grid [{lo:g}, {hi:g}]")

    def lam(theta: float) -> float:
        check(theta)
        return float(spline(theta))

    def dlam(theta: float) -> float:
        check(theta)
        return float((spline(theta + h) - spline(theta - h)) / (2.0 * h))

    def d2lam(theta: float) -> float:
        check(theta)
        return float((spline(theta + h) - 2.0 * spline(theta) + spline(theta - h)) / h**2)

    return SpectralProfile(
        lambda_=lam,
        dlambda=dlam,
        d2lambda=d2lam,
        theta_lower=theta_lower,
        lattice=spec.lattice,
        source="monte_carlo",
        theta_upper=hi,
        domain_min=lo,
        grid=tuple(float(x) for x in grid),
        samples=samples,
        estimates=tuple(estimates),
    )


def build_profile(
    spec: EnvironmentSpec,
    mc_config: MonteCarloConfig | None = None,
    *,
    prefer_closed_form: bool = True,
) -> SpectralProfile:
    """Build the spectral profile of an environment.

    Closed forms are used whenever they exist (unless ``prefer_closed_form``
    is False); otherwise lambda is tabulated on a Monte Carlo theta grid,
    interpolated by a cubic spline and differentiated by central differences
    with a step of a quarter of the grid spacing.

    Args:
        spec: Environment.
        mc_config: Monte Carlo settings (defaults when None).
        prefer_closed_form: Use analytic evaluators when available.

    Returns:
        The profile.

    Raises:
        DomainError: If the Monte Carlo grid reaches underline-theta.

    Example:
        >>> profile = build_profile(EnvironmentSpec.bernoulli_sieve())
        >>> profile.dlambda(2.0)
        -0.5
    """
    closed = closed_form_spectral(spec)
    if closed is not None and prefer_closed_form:
        return SpectralProfile(
            lambda_=closed.lambda_,
            dlambda=closed.dlambda,
            d2lambda=closed.d2lambda,
            theta_lower=closed.theta_lower,
            lattice=spec.lattice,
            source="closed_form",
        )
    logger.info("Building Monte Carlo spectral profile for %s", spec.describe())
    return _mc_profile(spec, mc_config or MonteCarloConfig())


def _g(profile: SpectralProfile) -> Callable[[float], float]:
    """theta -> theta lambda'(theta) - lambda(theta)."""
    return lambda theta: theta * profile.dlambda(theta) - profile.lambda_(theta)


def solve_theta_star(profile: SpectralProfile) -> float:
    """Solve theta lambda'(theta) = lambda(theta) on (1, inf).

    The bracket is found by doubling from theta = 1, where the function equals
    lambda'(1) < 0.

    Raises:
        NoThetaStarError: If there is no sign change up to the configured
            ``theta_max`` (or the end of a Monte Carlo grid).

    Example:
        >>> solve_theta_star(build_profile(EnvironmentSpec.bernoulli_sieve()))
        2.718281828...
    """
    cfg = get_config()
    g = _g(profile)
    ceiling = min(cfg.theta_max, profile.theta_upper)
    lo = 1.0
    hi = 2.0
    while True:
        hi = min(hi, ceiling)
        if g(hi) > 0:
            break
        if hi >= ceiling:
            raise NoThetaStarError(
                f"theta*lambda'(theta) - lambda(theta) has no sign change on (1, {ceiling:g}]"
            )
        lo, hi = hi, 2.0 * hi
    return float(bisect(g, lo, hi, xtol=cfg.root_tol, maxiter=_MAX_ITERATIONS))


def _left_probe(profile: SpectralProfile, k: int) -> float:
    """k-th probe point approaching the left end of the domain from theta = 1."""
    left = profile.left_end
    if math.isinf(left):
        return 1.0 - 2.0**k
    if profile.domain_min is not None:
        return max(left, 1.0 - (1.0 - left) * (1.0 - 2.0**-k))
    return left + (1.0 - left) * 2.0**-k


def solve_theta_for_slope(profile: SpectralProfile, a: float) -> float:
    """Solve -lambda'(theta) = a.

    -lambda' is decreasing, so the root is bracketed by moving from theta = 1
    toward larger theta (when a < a_c) or toward underline-theta (when a > a_c).

    Args:
        profile: Spectral profile.
        a: Positive slope.

    Returns:
        theta with -lambda'(theta) = a, to the configured root tolerance.

    Raises:
        SlopeOutOfRangeError: If -lambda' does not attain a on the domain.
    """
    cfg = get_config()
    if not a > 0 or not math.isfinite(a):
        raise SlopeOutOfRangeError(f"Slope must be positive and finite, got a={a!r}")

    def f(theta: float) -> float:
        return -profile.dlambda(theta) - a

    f_one = f(1.0)
    if f_one == 0.0:
        return 1.0
    if f_one > 0:
        ceiling = min(cfg.theta_max, profile.theta_upper)
        lo, hi = 1.0, 2.0
        while True:
            hi = min(hi, ceiling)
            if f(hi) < 0:
                return float(bisect(f, lo, hi, xtol=cfg.root_tol, maxiter=_MAX_ITERATIONS))
            if hi >= ceiling:
                raise SlopeOutOfRangeError(
                    f"a={a!r} is below the smallest attainable slope on (1, {ceiling:g}]"
                )
            lo, hi = hi, 2.0 * hi
    hi = 1.0
    for k in range(1, 64):
        lo = _left_probe(profile, k)
        if not profile.in_domain(lo) or lo < -cfg.theta_max:
            break
        value = f(lo)
        if not math.isfinite(value):
            continue
        if value > 0:
            return float(bisect(f, lo, hi, xtol=cfg.root_tol, maxiter=_MAX_ITERATIONS))
        hi = lo
    raise SlopeOutOfRangeError(
        f"a={a!r} exceeds every slope attained on the domain above theta={profile.left_end:g}"
    )


def legendre(profile: SpectralProfile, a: float) -> float:
    """Rate function lambda*(a) = -(theta a + lambda(theta)) where -lambda'(theta) = a.

    Raises:
        SlopeOutOfRangeError: Propagated from the slope solver.
    """
    theta = solve_theta_for_slope(profile, a)
    return -(theta * a + profile.lambda_(theta))


@dataclass(frozen=True)
class CriticalConstants:
    """Critical points and density thresholds of a profile.

    Attributes:
        theta_star: theta*.
        v: Speed -lambda(theta*)/theta*.
        theta_sub: theta_* (underline-theta when the set defining it is empty,
            0 under property A).
        a_star: a_* = -lambda(2)/2 if theta* > 2, else v.
        a_c: Saturation density -lambda'(1).
        a_bar: -lambda' at the right limit of max(underline-theta, 0); may be inf.
        a_bar_minus: -lambda'(theta_*+), property B only.
        property: "A" or "B".
        slope_at_two: -lambda'(2), the IIA/IIC boundary.
        slope_at_zero: -lambda'(0), property B only.
    """

    theta_star: float
    v: float
    theta_sub: float
    a_star: float
    a_c: float
    a_bar: float
    a_bar_minus: float | None
    property: SpectralProperty
    slope_at_two: float
    slope_at_zero: float | None

    def as_dict(self) -> dict[str, float | str | None]:
        """Return the constants as a plain mapping in display order."""
        return {
            "theta_star": self.theta_star,
            "v": self.v,
            "theta_sub": self.theta_sub,
            "a_star": self.a_star,
            "a_c": self.a_c,
            "a_bar": self.a_bar,
            "a_bar_minus": self.a_bar_minus,
            "property": self.property,
            "slope_at_two": self.slope_at_two,
            "slope_at_zero": self.slope_at_zero,
        }


def _require_nonlattice(profile: SpectralProfile) -> None:
    if profile.lattice:
        raise LatticeEnvironmentError(
            "Lattice environment: regime constants and local limits need a nonlattice law"
        )


def _boundary_slope(profile: SpectralProfile, boundary: float, offset: float) -> float:
    """-lambda' just right of a boundary point, inf if it diverges there."""
    near, nearer = boundary + offset, boundary + offset / 10.0
    if not (profile.in_domain(near) and profile.in_domain(nearer)):
        return math.inf
    s1 = -profile.dlambda(near)
    s2 = -profile.dlambda(nearer)
    if not (math.isfinite(s1) and math.isfinite(s2)):
        return math.inf
    if abs(s2 - s1) > 0.5 * max(abs(s1), 1.0):
        return math.inf
    return s1


def _theta_sub(profile: SpectralProfile) -> float:
    """theta_* = inf{theta in (underline-theta, 0): g(theta) < 0}; g is decreasing there."""
    cfg = get_config()
    g = _g(profile)
    lower = profile.theta_lower
    if math.isinf(lower):
        left = -cfg.theta_max
    elif profile.domain_min is not None:
        left = profile.domain_min
    else:
        left = lower + SUB_OFFSET
    g_left = g(left)
    if not math.isfinite(g_left) or g_left > 0:
        return float(bisect(g, left, 0.0, xtol=cfg.root_tol, maxiter=_MAX_ITERATIONS))
    return lower


def critical_constants(profile: SpectralProfile) -> CriticalConstants:
    """Compute theta*, v, theta_*, a_*, a_c, a-bar and a-bar-minus.

    Raises:
        LatticeEnvironmentError: For lattice environments.
        NoThetaStarError: Propagated from ``solve_theta_star``.
    """
    _require_nonlattice(profile)
    theta_star = solve_theta_star(profile)
    v = -profile.lambda_(theta_star) / theta_star
    a_star = -profile.lambda_(2.0) / 2.0 if theta_star > 2.0 else v
    a_c = -profile.dlambda(1.0)
    prop = profile.spectral_property
    a_bar = _boundary_slope(profile, max(profile.theta_lower, 0.0), BOUNDARY_OFFSET)

    theta_sub = 0.0
    a_bar_minus: float | None = None
    slope_at_zero: float | None = None
    if prop == "B":
        theta_sub = _theta_sub(profile)
        slope_at_zero = -profile.dlambda(0.0)
        if math.isinf(theta_sub):
            a_bar_minus = -profile.dlambda(-get_config().theta_max)
        else:
            a_bar_minus = _boundary_slope(profile, theta_sub, SUB_OFFSET)
    constants = CriticalConstants(
        theta_star=theta_star,
        v=v,
        theta_sub=theta_sub,
        a_star=a_star,
        a_c=a_c,
        a_bar=a_bar,
        a_bar_minus=a_bar_minus,
        property=prop,
        slope_at_two=-profile.dlambda(2.0),
        slope_at_zero=slope_at_zero,
    )
    logger.debug("Critical constants: %s", constants)
    return constants


def alpha_exponent(
    profile: SpectralProfile, a: float, constants: CriticalConstants | None = None
) -> float:
    """Exponent alpha(a) of the sublinear deficit n - K at density a.

    alpha(a) = -lambda*(a)/a when a > -lambda'(2), else 2 + lambda(2)/a. The two
    branches agree at a = -lambda'(2) and alpha(a_c) = 1.

    Raises:
        DomainError: If a is not in (a_*, a-bar).
    """
    constants = constants or critical_constants(profile)
    if not constants.a_star < a < constants.a_bar:
        raise DomainError(
            f"alpha(a) needs a in (a_*={constants.a_star:.6g}, a_bar={constants.a_bar:.6g}), "
            f"got a={a!r}"
        )
    if a > constants.slope_at_two:
        return -legendre(profile, a) / a
    return 2.0 + profile.lambda_(2.0) / a


def classify_regime(
    constants: CriticalConstants, profile: SpectralProfile, a: float
) -> tuple[RegimeLabel, ...]:
    """Density regimes of a level with ball density a.

    Thresholds: I below a_*; IIA up to -lambda'(2); IIB at -lambda'(2); IIC up
    to a_c; III at a_c; IV up to a-bar. Freezing is added under property B for
    -lambda'(0) < a < a-bar-minus. Equalities use the configured tolerance and
    the exact point a = a_* is OutOfRange.

    Returns:
        The applicable labels, ``("OutOfRange",)`` when none applies.

    Raises:
        LatticeEnvironmentError: For lattice environments.
        DomainError: If a is not positive.
    """
    _require_nonlattice(profile)
    if not a > 0:
        raise DomainError(f"Density must be positive, got a={a!r}")
    tol = get_config().equality_tol
    labels: list[RegimeLabel] = []
    if abs(a - constants.a_star) <= tol:
        pass
    elif a < constants.a_star:
        labels.append("I")
    elif abs(a - constants.slope_at_two) <= tol:
        labels.append("IIB")
    elif a < constants.slope_at_two:
        labels.append("IIA")
    elif abs(a - constants.a_c) <= tol:
        labels.append("III")
    elif a < constants.a_c:
        labels.append("IIC")
    elif a < constants.a_bar:
        labels.append("IV")
    if (
        constants.property == "B"
        and constants.slope_at_zero is not None
        and constants.a_bar_minus is not None
        and constants.slope_at_zero < a < constants.a_bar_minus
    ):
        labels.append("Freezing")
    return tuple(labels) if labels else ("OutOfRange",)
