"""Typed errors shared across the package."""


class EscapeLabError(Exception):
    """Base class for all package errors."""


class DomainError(EscapeLabError):
    """Input outside the mathematical domain of an operation."""


class InvalidIsometryError(EscapeLabError):
    """Matrix does not define a valid unimodular isometry."""


class GroupDataError(EscapeLabError):
    """Schottky disk/pairing data violates the ping-pong requirements."""


class ReductionError(EscapeLabError):
    """Fundamental-domain reduction failed to terminate."""


class TruncationError(EscapeLabError):
    """Orbit enumeration exceeded the configured budget."""

    def __init__(self, msg, words_yielded=None):
        super().__init__(msg)
        self.words_yielded = words_yielded


class InsufficientSignalError(EscapeLabError):
    """Monte Carlo signal too weak for the requested estimate."""


class ConfigurationError(EscapeLabError):
    """Invalid experiment configuration."""


class PrecisionError(EscapeLabError):
    """A certified error bound could not be established."""


class ResolutionError(EscapeLabError):
    """Oscillatory quadrature resolution budget exceeded."""

    def __init__(self, msg, required_points=None):
        super().__init__(msg)
        self.required_points = required_points


class ExtrapolationError(EscapeLabError):
    """Requested evaluation outside the tabulated curve range."""


class SchemaError(EscapeLabError):
    """Persisted record does not match the published schema."""
