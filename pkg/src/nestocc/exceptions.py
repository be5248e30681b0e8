"""Exception hierarchy for nestocc.

Value-type errors also derive from ``ValueError`` so that callers catching the
builtin keep working.
"""

from __future__ import annotations


class NestoccError(Exception):
    """Base class for all nestocc errors."""


class ConfigurationError(NestoccError, ValueError):
    """Invalid environment parameters or experiment configuration."""


class DomainError(NestoccError, ValueError):
    """An argument lies outside the domain where an evaluator is defined."""


class NoThetaStarError(DomainError):
    """theta * lambda'(theta) - lambda(theta) has no root on (1, theta_max]."""


class SlopeOutOfRangeError(DomainError):
    """The slope a is not attained by -lambda' on the profile's domain."""


class LatticeEnvironmentError(DomainError):
    """The environment is lattice; the local limit theory does not apply."""


class InadmissibleRegimeError(DomainError):
    """A prediction was requested outside the regime it is stated for."""


class MissingBoxCountError(NestoccError, ValueError):
    """Empty boxes were requested without an exact count of available boxes."""


class MemoryBudgetError(NestoccError, RuntimeError):
    """A tree would exceed the configured memory budget.

    Attributes:
        estimated_boxes: Estimated (or reached) number of boxes.
        max_boxes: Number of boxes allowed by the budget.
    """

    def __init__(self, estimated_boxes: float, max_boxes: int) -> None:
        """Initialize with the estimated and allowed box counts."""
        self.estimated_boxes = estimated_boxes
        self.max_boxes = max_boxes
        super().__init__(
            f"Tree refused: about {estimated_boxes:.4g} boxes exceed the memory budget "
            f"of {max_boxes} boxes (set NESTOCC_MEMORY_BUDGET_MB to raise it)"
        )
