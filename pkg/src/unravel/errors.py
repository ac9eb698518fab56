"""Exception types raised by the package."""


class UnravelError(Exception):
    """Base class for all package errors."""


class DomainError(UnravelError, ValueError):
    """An argument lies outside the mathematical domain of an operation."""


class DimensionError(UnravelError, ValueError):
    """Operator and state dimensions do not match."""


class TruncationError(UnravelError, ValueError):
    """The Fock truncation is too small to represent a requested state."""


class InstabilityError(UnravelError, RuntimeError):
    """The integrator left its region of validity; reduce the time step."""


class FitError(UnravelError, ValueError):
    """A rate fit could not be performed on the requested window."""


class ConfigError(UnravelError, ValueError):
    """An experiment configuration is malformed or incomplete."""


class TruncationWarning(UserWarning):
    """Population reached the top levels of the truncated basis."""
