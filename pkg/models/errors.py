"""
Exception hierarchy for the ProjectCarleson system.
"""
from typing import Any, Optional


class CarlesonError(Exception):
    """Base class for all ProjectCarleson errors."""


class PreconditionViolation(CarlesonError, ValueError):
    """An operation was called outside its documented domain."""


class ZeroDirection(CarlesonError):
    """The direction x/|x| of a point is undefined because x is the origin."""


class DegenerateRegion(CarlesonError):
    """The region G is empty for the requested parameters (pi/2 - r0 <= 0)."""


class InvalidAlpha(PreconditionViolation):
    """alpha <= -1, so nu_alpha is not a finite measure."""


class EmptyBox(CarlesonError):
    """A Carleson box has non-positive height after clamping."""


class NetTooSparse(CarlesonError):
    """The candidate point set cannot carry an eta^k-net at some level."""

    def __init__(self, level: int, message: Optional[str] = None):
        self.level = level
        super().__init__(message or f"candidate set too sparse for the level-{level} net")


class CoverageFailure(CarlesonError):
    """A test cap is contained in no cube of any system."""

    def __init__(self, witness: Any, message: Optional[str] = None):
        self.witness = witness
        super().__init__(message or f"cap not covered by any cube: {witness}")


class ZeroWeight(CarlesonError):
    """A negative power of a weight was requested where the weight vanishes."""


class DivisionByZeroWeight(CarlesonError):
    """A pointwise division by the weight hit a zero value."""


class NonConvergence(CarlesonError):
    """An iterative estimate did not reach its tolerance."""

    def __init__(self, iterations: int, residual: float):
        self.iterations = iterations
        self.residual = residual
        super().__init__(f"no convergence after {iterations} iterations (residual {residual:.3e})")
