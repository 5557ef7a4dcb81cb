"""Exception types raised by the numerical routines."""


class ELSError(Exception):
    """Base class for every error raised by elslab."""


class DomainError(ELSError, ValueError):
    """An argument lies outside the domain of the operation."""


class OutOfRangeError(ELSError, ValueError):
    """A target value cannot be reached by a monotone inversion."""


class KOViolation(ELSError):
    """The Keller-Osserman integral diverges for this nonlinearity."""


class PreconditionError(ELSError, ValueError):
    """An input fails a stated precondition (e.g. divergent H_rho)."""


class TrajectoryInvalidError(ELSError):
    """A shooting trajectory reached u <= 0."""


class NoSeparatrixError(ELSError):
    """Bisection brackets never straddled the requested threshold."""

    def __init__(self, message, lower=None, upper=None):
        super().__init__(message)
        self.lower = lower
        self.upper = upper


class NoSolutionError(ELSError):
    """No initial value in the search bracket produced the requested limit."""


class InapplicableError(ELSError):
    """A bound's hypotheses fail for the given data."""


class OrderingViolationError(ELSError):
    """Two solutions that must stay ordered crossed each other."""
