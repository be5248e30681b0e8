"""Random environments: the law of one box's fragmentation.

A random environment is the joint law of the probabilities (P_k) into which a
box splits. Three families are supported:

    - Bernoulli sieve: P_r = W_1 ... W_{r-1} (1 - W_r) with i.i.d. sticks W
      (uniform or Beta), an infinite sequence truncated by a mass floor.
    - Dirichlet split: a symmetric Dirichlet(alpha) vector of length m.
    - Deterministic split: one fixed probability vector.

Key functions:
    - sample_fragmentation(): one box's fragmentation
    - sample_level(): fragmentations of many boxes at once (vectorized)
    - closed_form_spectral(): analytic lambda, lambda', lambda'' when available
    - mc_log_laplace(): Monte Carlo estimate of lambda(theta)
"""

from __future__ import annotations

import logging
import math
from collections.abc import Callable, Mapping, Sequence
from dataclasses import dataclass, field
from fractions import Fraction
from typing import Any

import numpy as np
from numpy.typing import ArrayLike, NDArray
from scipy.special import digamma, gammaln, logsumexp, polygamma

from .config import get_config
from .exceptions import ConfigurationError
from .types import EnvironmentKind, StickLawName

logger = logging.getLogger(__name__)

FloatArray = NDArray[np.float64]
IntArray = NDArray[np.int64]

CONSERVATION_TOL = 1e-12
"""Tolerance of sum(probs) + residual = 1 for a single fragmentation."""

MAX_STICKS = 100_000
"""Hard cap on the number of sticks generated for one box."""

_LATTICE_MAX_DENOMINATOR = 64


@dataclass(frozen=True)
class StickLaw:
    """Law of the stick variable W of a Bernoulli sieve.

    Attributes:
        name: "uniform" for W ~ U(0, 1) or "beta" for W ~ Beta(a, b).
        a: First Beta shape parameter (ignored for "uniform").
        b: Second Beta shape parameter (ignored for "uniform").
    """

    name: StickLawName = "uniform"
    a: float = 1.0
    b: float = 1.0

    def __post_init__(self) -> None:
        """Validate shape parameters."""
        if self.name not in ("uniform", "beta"):
            raise ConfigurationError(f"Unknown stick law: {self.name!r}")
        if self.name == "beta" and (self.a <= 0 or self.b <= 0):
            raise ConfigurationError(
                f"Beta stick law needs positive shapes, got a={self.a}, b={self.b}"
            )

    def sample(self, rng: np.random.Generator, size: int) -> FloatArray:
        """Draw ``size`` independent sticks."""
        if self.name == "uniform":
            return rng.random(size)
        return rng.beta(self.a, self.b, size)


@dataclass(frozen=True)
class EnvironmentSpec:
    """A random environment, i.e. a generator of one box's fragmentation.

    Use the ``bernoulli_sieve``, ``dirichlet_split`` and ``deterministic_split``
    constructors rather than filling fields by hand.

    Attributes:
        kind: Environment family.
        stick_law: Stick law (Bernoulli sieve only).
        m: Number of pieces (Dirichlet split only).
        alpha: Dirichlet concentration (Dirichlet split only).
        weights: Fixed probability vector (deterministic split only).
    """

    kind: EnvironmentKind
    stick_law: StickLaw = field(default_factory=StickLaw)
    m: int = 2
    alpha: float = 1.0
    weights: tuple[float, ...] = ()

    def __post_init__(self) -> None:
        """Validate parameters of the chosen family."""
        if self.kind == "bernoulli_sieve":
            return
        if self.kind == "dirichlet_split":
            if self.m < 2:
                raise ConfigurationError(f"Dirichlet split needs m >= 2, got m={self.m}")
            if self.alpha <= 0:
                raise ConfigurationError(
                    f"Dirichlet split needs alpha > 0, got alpha={self.alpha}"
                )
            return
        if self.kind == "deterministic_split":
            if len(self.weights) < 2:
                raise ConfigurationError(
                    "Deterministic split needs at least 2 weights so that the mean "
                    "number of boxes exceeds one"
                )
            if any(not 0.0 < w <= 1.0 for w in self.weights):
                raise ConfigurationError(
                    f"Deterministic weights must lie in (0, 1], got {list(self.weights)}"
                )
            total = math.fsum(self.weights)
            if abs(total - 1.0) > CONSERVATION_TOL:
                raise ConfigurationError(f"Deterministic weights must sum to 1, got {total!r}")
            return
        raise ConfigurationError(f"Unknown environment kind: {self.kind!r}")

    @classmethod
    def bernoulli_sieve(cls, law: StickLaw | None = None) -> EnvironmentSpec:
        """Bernoulli sieve with the given stick law (uniform by default)."""
        return cls(kind="bernoulli_sieve", stick_law=law or StickLaw())

    @classmethod
    def dirichlet_split(cls, m: int, alpha: float) -> EnvironmentSpec:
        """Symmetric Dirichlet(alpha) split into m pieces."""
        return cls(kind="dirichlet_split", m=m, alpha=alpha)

    @classmethod
    def deterministic_split(cls, weights: Sequence[float]) -> EnvironmentSpec:
        """Deterministic split with a fixed probability vector."""
        return cls(kind="deterministic_split", weights=tuple(float(w) for w in weights))

    @classmethod
    def from_mapping(cls, section: Mapping[str, Any]) -> EnvironmentSpec:
        """Build a spec from the ``[environment]`` section of a config file.

        Args:
            section: Mapping with ``kind`` and the family's numeric parameters
                (``law``, ``a``, ``b`` / ``m``, ``alpha`` / ``weights``).

        Raises:
            ConfigurationError: If keys are missing or parameters are invalid.
        """
        kind = section.get("kind")
        if kind == "bernoulli_sieve":
            law_name = section.get("law", "uniform")
            law = StickLaw(
                name=law_name,
                a=float(section.get("a", 1.0)),
                b=float(section.get("b", 1.0)),
            )
            return cls.bernoulli_sieve(law)
        if kind == "dirichlet_split":
            missing = sorted({"m", "alpha"} - set(section))
            if missing:
                raise ConfigurationError(f"[environment] missing keys: {missing}")
            return cls.dirichlet_split(int(section["m"]), float(section["alpha"]))
        if kind == "deterministic_split":
            if "weights" not in section:
                raise ConfigurationError("[environment] missing keys: ['weights']")
            return cls.deterministic_split(section["weights"])
        raise ConfigurationError(f"[environment] unknown kind: {kind!r}")

    @property
    def finite_offspring(self) -> bool:
        """Whether every box splits into finitely many pieces."""
        return self.kind != "bernoulli_sieve"

    @property
    def mean_offspring(self) -> float:
        """Mean number of positive pieces, ``inf`` for a Bernoulli sieve."""
        if self.kind == "dirichlet_split":
            return float(self.m)
        if self.kind == "deterministic_split":
            return float(len(self.weights))
        return math.inf

    @property
    def theta_lower(self) -> float:
        """underline-theta: the left end of the domain of lambda."""
        if self.kind == "bernoulli_sieve":
            return 0.0
        if self.kind == "dirichlet_split":
            return -self.alpha
        return -math.inf

    @property
    def lattice(self) -> bool:
        """Whether the positions -log P_k live on a lattice a Z + b.

        Only deterministic splits can be lattice: their log-weights must all be
        rational multiples of one another.
        """
        if self.kind != "deterministic_split":
            return False
        logs = [-math.log(w) for w in self.weights if w < 1.0]
        if not logs:
            return True
        base = logs[0]
        for value in logs[1:]:
            ratio = value / base
            approx = Fraction(ratio).limit_denominator(_LATTICE_MAX_DENOMINATOR)
            if abs(ratio - float(approx)) > 1e-9:
                return False
        return True

    def describe(self) -> str:
        """Short human-readable description."""
        if self.kind == "bernoulli_sieve":
            law = self.stick_law
            if law.name == "uniform":
                return "BernoulliSieve(Uniform01)"
            return f"BernoulliSieve(Beta({law.a:g}, {law.b:g}))"
        if self.kind == "dirichlet_split":
            return f"DirichletSplit({self.m}, {self.alpha:g})"
        return f"DeterministicSplit({list(self.weights)})"


@dataclass(frozen=True)
class Fragmentation:
    """One box's fragmentation probabilities.

    Attributes:
        probs: Positive fragment probabilities in generation order.
        residual: Unexpanded tail mass of a truncated infinite sequence.
    """

    probs: FloatArray
    residual: float = 0.0

    def __post_init__(self) -> None:
        """Check conservation of mass."""
        total = math.fsum(self.probs.tolist()) + self.residual
        if abs(total - 1.0) > CONSERVATION_TOL:
            raise ValueError(f"Fragmentation does not conserve mass: total={total!r}")


@dataclass(frozen=True)
class LevelSample:
    """Fragmentations of a batch of parent boxes.

    Attributes:
        parent: Parent index of every child, nondecreasing.
        probs: Probability of every child relative to its parent.
        residual: Relative truncated mass per parent.
    """

    parent: IntArray
    probs: FloatArray
    residual: FloatArray


def _relative_floors(parent_weights: FloatArray, mass_floor: float) -> FloatArray:
    """Relative truncation floor per parent for an absolute mass floor."""
    with np.errstate(divide="ignore"):
        return np.where(parent_weights > 0, mass_floor / parent_weights, np.inf)


def _sieve_level(law: StickLaw, floors: FloatArray, rng: np.random.Generator) -> LevelSample:
    """Stick-breaking for many parents, stopping each when its residual < floor."""
    n_parents = floors.size
    remaining = np.ones(n_parents)
    active = np.flatnonzero(floors < 1.0)
    parents: list[IntArray] = []
    probs: list[FloatArray] = []
    rounds: list[IntArray] = []
    r = 0
    while active.size:
        if r >= MAX_STICKS:
            raise ConfigurationError(
                f"Stick-breaking did not reach the mass floor within {MAX_STICKS} sticks"
            )
        w = law.sample(rng, active.size)
        p = remaining[active] * (1.0 - w)
        remaining[active] *= w
        keep = p > 0
        parents.append(active[keep])
        probs.append(p[keep])
        rounds.append(np.full(int(keep.sum()), r, dtype=np.int64))
        active = active[remaining[active] >= floors[active]]
        r += 1
    if not parents:
        return LevelSample(
            parent=np.empty(0, dtype=np.int64), probs=np.empty(0), residual=remaining
        )
    parent = np.concatenate(parents)
    prob = np.concatenate(probs)
    order = np.lexsort((np.concatenate(rounds), parent))
    return LevelSample(parent=parent[order], probs=prob[order], residual=remaining)


def _finite_level(
    spec: EnvironmentSpec, n_parents: int, rng: np.random.Generator
) -> LevelSample:
    """Dirichlet or deterministic fragmentations for many parents."""
    if spec.kind == "dirichlet_split":
        matrix = rng.dirichlet(np.full(spec.m, spec.alpha), size=n_parents)
    else:
        matrix = np.tile(np.asarray(spec.weights, dtype=np.float64), (n_parents, 1))
    width = matrix.shape[1]
    parent = np.repeat(np.arange(n_parents, dtype=np.int64), width)
    prob = matrix.reshape(-1)
    # Zero pieces (Dirichlet underflow) are absent boxes.
    keep = prob > 0
    return LevelSample(parent=parent[keep], probs=prob[keep], residual=np.zeros(n_parents))


def sample_level(
    spec: EnvironmentSpec,
    parent_weights: ArrayLike,
    mass_floor: float,
    rng: np.random.Generator,
) -> LevelSample:
    """Sample the fragmentations of a batch of boxes.

    For a Bernoulli sieve the floor is absolute, not relative to the parent: a
    parent of weight w generates sticks until its unexpanded residual, in
    absolute mass, drops below ``mass_floor``, i.e. with relative floor
    ``mass_floor / w``. Parents with ``w <= mass_floor`` are not expanded at all.

    Args:
        spec: Environment to sample from.
        parent_weights: Absolute weights of the parents.
        mass_floor: Absolute truncation floor (ignored for finite environments).
        rng: Random stream; draws are consumed in parent order.

    Returns:
        Children grouped by parent, in generation order within each parent.
    """
    weights = np.asarray(parent_weights, dtype=np.float64)
    if spec.kind == "bernoulli_sieve":
        if not 0.0 < mass_floor < 1.0:
            raise ConfigurationError(
                f"Bernoulli sieve needs 0 < mass_floor < 1, got {mass_floor!r}; "
                "full expansion of an infinite fragmentation is impossible"
            )
        return _sieve_level(spec.stick_law, _relative_floors(weights, mass_floor), rng)
    return _finite_level(spec, weights.size, rng)


def sample_fragmentation(
    spec: EnvironmentSpec, mass_floor: float, rng: np.random.Generator
) -> Fragmentation:
    """Sample one box's fragmentation.

    Args:
        spec: Environment to sample from.
        mass_floor: Stop the stick-breaking once W_1 ... W_r < mass_floor
            (ignored for finite environments).
        rng: Random stream.

    Returns:
        The fragmentation; ``residual`` carries the stopped mass.

    Raises:
        ConfigurationError: If ``mass_floor`` is not in (0, 1) for a sieve.
    """
    if spec.finite_offspring:
        mass_floor = 0.0
    elif mass_floor >= 1.0:
        raise ConfigurationError(f"mass_floor must be < 1, got {mass_floor!r}")
    level = sample_level(spec, np.ones(1), mass_floor, rng)
    return Fragmentation(probs=level.probs, residual=float(level.residual[0]))


@dataclass(frozen=True)
class ClosedFormSpectral:
    """Analytic lambda and derivatives of an environment.

    Attributes:
        lambda_: theta -> log E sum_k P_k^theta.
        dlambda: First derivative of lambda.
        d2lambda: Second derivative of lambda.
        theta_lower: Left end of the domain of lambda.
    """

    lambda_: Callable[[float], float]
    dlambda: Callable[[float], float]
    d2lambda: Callable[[float], float]
    theta_lower: float


def _uniform_sieve_spectral() -> ClosedFormSpectral:
    return ClosedFormSpectral(
        lambda_=lambda theta: -math.log(theta) if theta > 0 else math.inf,
        dlambda=lambda theta: -1.0 / theta,
        d2lambda=lambda theta: 1.0 / theta**2,
        theta_lower=0.0,
    )


def _dirichlet_spectral(m: int, alpha: float) -> ClosedFormSpectral:
    const = math.log(m) + float(gammaln(alpha * m)) - float(gammaln(alpha))

    def lam(theta: float) -> float:
        if theta <= -alpha:
            return math.inf
        return const + float(gammaln(alpha + theta)) - float(gammaln(alpha * m + theta))

    def dlam(theta: float) -> float:
        return float(digamma(alpha + theta)) - float(digamma(alpha * m + theta))

    def d2lam(theta: float) -> float:
        return float(polygamma(1, alpha + theta)) - float(polygamma(1, alpha * m + theta))

    return ClosedFormSpectral(lambda_=lam, dlambda=dlam, d2lambda=d2lam, theta_lower=-alpha)


def _deterministic_spectral(weights: tuple[float, ...]) -> ClosedFormSpectral:
    logw = np.log(np.asarray(weights, dtype=np.float64))

    def tilted(theta: float) -> FloatArray:
        z = theta * logw
        result: FloatArray = np.exp(z - logsumexp(z))
        return result

    def lam(theta: float) -> float:
        return float(logsumexp(theta * logw))

    def dlam(theta: float) -> float:
        return float(np.dot(tilted(theta), logw))

    def d2lam(theta: float) -> float:
        p = tilted(theta)
        mean = float(np.dot(p, logw))
        return max(float(np.dot(p, logw**2)) - mean**2, 0.0)

    return ClosedFormSpectral(lambda_=lam, dlambda=dlam, d2lambda=d2lam, theta_lower=-math.inf)


def closed_form_spectral(spec: EnvironmentSpec) -> ClosedFormSpectral | None:
    """Return analytic spectral evaluators when the environment has them.

    - Uniform sieve: lambda(theta) = -log(theta), underline-theta = 0.
    - Dirichlet(m, alpha): lambda(theta) = log m + log Gamma(alpha + theta)
      + log Gamma(alpha m) - log Gamma(alpha) - log Gamma(alpha m + theta),
      underline-theta = -alpha.
    - Deterministic(w): lambda(theta) = log sum_i w_i^theta, underline-theta = -inf.

    Beta sieves have no closed form here and return ``None`` (Monte Carlo
    fallback).
    """
    if spec.kind == "bernoulli_sieve":
        if spec.stick_law.name == "uniform":
            return _uniform_sieve_spectral()
        return None
    if spec.kind == "dirichlet_split":
        return _dirichlet_spectral(spec.m, spec.alpha)
    return _deterministic_spectral(spec.weights)


@dataclass(frozen=True)
class MonteCarloEstimate:
    """Monte Carlo estimate of lambda(theta).

    Attributes:
        theta: Evaluation point.
        estimate: log of the sample mean of sum_k P_k^theta.
        stderr: Delta-method standard error, including the truncation bound.
        flagged: Whether the estimate looks unreliable.
        reason: Why it was flagged, if it was.
    """

    theta: float
    estimate: float
    stderr: float
    flagged: bool = False
    reason: str | None = None


_ROUNDING_FLOOR = 1e-12


def _power_sums(
    sample: LevelSample, thetas: FloatArray, n_boxes: int
) -> tuple[FloatArray, FloatArray]:
    """Per-box sums of P^theta and residual^theta for every theta."""
    log_p = np.log(sample.probs)
    sums = np.empty((thetas.size, n_boxes))
    tails = np.empty((thetas.size, n_boxes))
    for i, theta in enumerate(thetas):
        sums[i] = np.bincount(sample.parent, weights=np.exp(theta * log_p), minlength=n_boxes)
        with np.errstate(divide="ignore"):
            tails[i] = np.where(sample.residual > 0, sample.residual**theta, 0.0)
    return sums, tails


def mc_log_laplace_grid(
    spec: EnvironmentSpec,
    thetas: ArrayLike,
    samples: int,
    rng: np.random.Generator,
    mass_floor: float | None = None,
) -> list[MonteCarloEstimate]:
    """Estimate lambda on a grid with common random numbers.

    The same ``samples`` fragmentations are reused for every theta so that the
    estimated curve is smooth in theta.

    Args:
        spec: Environment.
        thetas: Evaluation points, each above underline-theta.
        samples: Number of independent fragmentations (at least 100).
        rng: Random stream.
        mass_floor: Truncation floor for sieves (defaults to the config value).

    Returns:
        One estimate per theta, in input order.
    """
    if samples < 100:
        raise ConfigurationError(f"mc_log_laplace needs at least 100 samples, got {samples}")
    floor = get_config().mass_floor if mass_floor is None else mass_floor
    grid = np.atleast_1d(np.asarray(thetas, dtype=np.float64))
    sample = sample_level(spec, np.ones(samples), floor, rng)
    sums, tails = _power_sums(sample, grid, samples)

    estimates: list[MonteCarloEstimate] = []
    half = samples // 2
    for i, theta in enumerate(grid):
        s = sums[i]
        mean = float(s.mean())
        stat = float(s.std(ddof=1)) / math.sqrt(samples) / mean
        tail_mean = float(tails[i].mean())
        flagged = False
        reason: str | None = None
        if theta >= 1.0:
            # For theta >= 1 the lost contribution of a residual R is at most R^theta.
            trunc = tail_mean / mean
        else:
            trunc = 0.0
            if tail_mean > stat * mean:
                flagged, reason = True, "truncated tail not negligible for theta < 1"
        stderr = math.sqrt(stat**2 + trunc**2 + _ROUNDING_FLOOR**2)
        first, second = float(s[:half].mean()), float(s[half:].mean())
        split_err = 2.0 * stat * mean
        if not flagged and abs(first - second) > 4.0 * max(split_err, _ROUNDING_FLOOR):
            flagged, reason = True, "running mean not stable across half samples"
        if not flagged and float(s.max()) > 0.1 * float(s.sum()):
            flagged, reason = True, "single sample dominates the mean"
        if flagged:
            logger.debug("lambda(%s) estimate flagged: %s", theta, reason)
        estimates.append(
            MonteCarloEstimate(
                theta=float(theta),
                estimate=math.log(mean),
                stderr=stderr,
                flagged=flagged,
                reason=reason,
            )
        )
    return estimates


def mc_log_laplace(
    spec: EnvironmentSpec,
    theta: float,
    samples: int,
    rng: np.random.Generator,
    mass_floor: float | None = None,
) -> MonteCarloEstimate:
    """Monte Carlo estimator of lambda(theta) = log E sum_k P_k^theta.

    Args:
        spec: Environment.
        theta: Evaluation point, above underline-theta (caller-asserted).
        samples: Number of independent fragmentations (at least 100).
        rng: Random stream.
        mass_floor: Truncation floor for sieves (defaults to the config value).

    Returns:
        Estimate with a delta-method standard error; ``flagged`` is set when
        the running mean does not stabilize or the truncated tail matters.
    """
    return mc_log_laplace_grid(spec, [theta], samples, rng, mass_floor)[0]
