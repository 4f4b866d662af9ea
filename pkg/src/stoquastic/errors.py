"""Exception types shared across the package."""


class StoquasticError(Exception):
    """Base class for every error raised by this package."""


class InputError(StoquasticError, ValueError):
    """Malformed input: wrong dimensions, bad indices, unknown names."""


class CapacityError(StoquasticError):
    """A brute-force or dense routine was asked to exceed its size cap."""


class PreconditionError(StoquasticError):
    """A documented precondition of an operation does not hold."""


class NotStoquasticError(PreconditionError):
    """Raised when an operation requires a stoquastic Hamiltonian.

    The offending ``StoquasticReport`` is attached as ``report``.
    """

    def __init__(self, message, report=None):
        super().__init__(message)
        self.report = report


class ScalingError(PreconditionError):
    """Row sums of G fall outside the range a walk scaling guarantees."""


class ConvergenceError(StoquasticError):
    """An iterative solver did not converge; carries the last iterate."""

    def __init__(self, message, value=None, vector=None):
        super().__init__(message)
        self.value = value
        self.vector = vector


class PostSelectionError(StoquasticError):
    """The post-selected sampler ran out of restarts."""

    def __init__(self, message, success_rate=None):
        super().__init__(message)
        self.success_rate = success_rate


class ResolventError(PreconditionError):
    """z lies on (or too near) the spectrum of the high-energy block."""
