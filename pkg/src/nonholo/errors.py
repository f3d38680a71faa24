"""Exception hierarchy used across the package."""


class NonholoError(Exception):
    """Base class for all package errors."""


class DimensionError(NonholoError, ValueError):
    """An argument has the wrong length or shape."""


class SingularMetricError(NonholoError, ValueError):
    """A metric or mass matrix is not symmetric positive definite."""


class DegenerateConstraintError(NonholoError, ValueError):
    """A constraint basis is rank deficient or its Gram matrix is not SPD."""


class NotQuasiLieError(NonholoError, ValueError):
    """An operation that needs a skew bracket with equal anchors got other data."""


class InvalidParameterError(NonholoError, ValueError):
    """System parameters violate an admissibility condition."""


class BlowUpError(NonholoError, FloatingPointError):
    """Integration produced a non-finite value.

    ``t`` is the time of the step that failed and ``trajectory`` holds the
    states accepted before it.
    """

    def __init__(self, message, t=None, trajectory=None):
        super().__init__(message)
        self.t = t
        self.trajectory = trajectory


class NonFiniteStateError(NonholoError, ValueError):
    """A state contains NaN or infinite entries."""
