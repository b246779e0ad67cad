"""Exception types raised across the package."""

from __future__ import annotations


class MetaBNEError(Exception):
    """Base class for all package errors."""


class ZeroMarginal(MetaBNEError, ValueError):
    """A type with zero prior marginal was used where a conditional is needed."""


class ShapeMismatch(MetaBNEError, ValueError):
    """Array shapes disagree with the game they are paired with."""


class InvalidDistribution(MetaBNEError, ValueError):
    """Weights are negative or do not sum to one."""


class TooLarge(MetaBNEError):
    """Game exceeds the exact-enumeration size cap."""


class UniquenessViolated(MetaBNEError):
    """A transformed game has more than one Bayesian Nash equilibrium."""

    def __init__(self, transformation_id: str, equilibria: list | None = None):
        self.transformation_id = transformation_id
        self.equilibria = list(equilibria or [])
        super().__init__(
            f"transformation {transformation_id!r} has {len(self.equilibria)} equilibria"
        )


class UniquenessUnknown(MetaBNEError):
    """Uniqueness of a transformed game could not be certified."""

    def __init__(self, transformation_id: str, reason: str = ""):
        self.transformation_id = transformation_id
        super().__init__(f"uniqueness of {transformation_id!r} unknown: {reason}")


class BoundaryEquilibrium(MetaBNEError):
    """Closed-form interior equilibrium leaves the feasible price interval."""


class HypothesisViolated(MetaBNEError):
    """Parameters do not satisfy the hypotheses of a comparative-statics claim."""


class GridTooCoarse(MetaBNEError):
    """Refining a discretised action grid moved equilibrium payoffs too much."""


class SchemaError(MetaBNEError, ValueError):
    """A game-definition file is malformed."""

    def __init__(self, message: str, field: str | None = None):
        self.field = field
        super().__init__(f"{field}: {message}" if field else message)
