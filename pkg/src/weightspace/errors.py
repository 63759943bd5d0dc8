"""Exception types raised by the numerical checks."""


class WeightSpaceError(Exception):
    """Base class for errors raised by this package."""


class InvalidParameterError(WeightSpaceError, ValueError):
    """A parameter violates an operation's precondition."""


class PreconditionError(WeightSpaceError):
    """An input fails a numerically witnessed hypothesis (tail/head witness, finiteness)."""


class DivergenceSuspected(WeightSpaceError):
    """A series or supremum did not settle within its budget."""

    def __init__(self, message, partial=None):
        super().__init__(message)
        self.partial = partial


class InsufficientDataError(WeightSpaceError):
    """Sampled data is too short to close a truncation bound."""


class RegularizationError(WeightSpaceError):
    """No convex regularization exists for the requested patch width."""


class WindowTooSmallError(WeightSpaceError):
    """A quadrature window does not contain the integrand's mass."""
