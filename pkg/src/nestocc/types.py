"""Type definitions for nestocc package."""

from __future__ import annotations

from typing import Literal

EnvironmentKind = Literal["bernoulli_sieve", "dirichlet_split", "deterministic_split"]
"""Literal type for the supported random environments.

- "bernoulli_sieve": stick-breaking fragmentation P_r = W_1...W_{r-1}(1 - W_r)
- "dirichlet_split": symmetric Dirichlet(alpha) split into m pieces
- "deterministic_split": the same fixed probability vector for every box
"""

StickLawName = Literal["uniform", "beta"]
"""Literal type for the law of the stick variables W of a Bernoulli sieve."""

AllocationMode = Literal["tree_first", "ball_driven"]
"""Literal type for ball allocation modes.

- "tree_first": materialize the weighted tree, then locate uniforms in it
- "ball_driven": expand only the occupied boxes while splitting ball counts
"""

SpectralSource = Literal["closed_form", "monte_carlo"]
"""Literal type for the provenance of a spectral profile."""

SpectralProperty = Literal["A", "B"]
"""Literal type for the two mutually exclusive shapes of the rate function.

- "A": lambda(0) is infinite (infinitely many boxes on average)
- "B": underline-theta < 0 (finite mean number of boxes)
"""

RegimeLabel = Literal["I", "IIA", "IIB", "IIC", "III", "IV", "Freezing", "OutOfRange"]
"""Literal type for the density regimes of a level with ball density a."""

PredictionForm = Literal["exact_n", "deficit", "fraction", "count"]
"""Literal type for what a prediction value measures.

- "exact_n": every ball in its own box, K = n
- "deficit": the number of balls sharing a box, n - K
- "fraction": K / n
- "count": a box count (K, K(k) or the empty-box count L)
"""

KernelName = Literal["phi", "m", "v", "w", "psi"]
"""Literal type for the Poisson kernels used by the quenched moments."""

RenewalKernel = Literal["indicator", "exp_kernel_m", "exp_kernel_phi"]
"""Literal type for the test functions of the renewal-sum check."""

TailMode = Literal["corollary", "proposition"]
"""Literal type for the two forms of the left-tail check."""

VerifyCheck = Literal["local_limit", "renewal", "tail"]
"""Literal type for the Gibbs-measure limit check run by ``verify-llt``."""
