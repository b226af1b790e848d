"""Exception hierarchy shared by every module."""


class PolyliftError(Exception):
    """Base class for all library errors."""


class ValidationError(PolyliftError, ValueError):
    """Input violates a documented precondition."""


class InvalidIndexError(ValidationError):
    """A generator index lies outside the index set."""


class DimensionError(ValidationError):
    """Coefficient or lift dimensions do not agree."""


class UnsupportedInputError(ValidationError):
    """Input is well formed but outside what the routine handles."""


class ParityError(ValidationError):
    """An odd lift size was requested together with matching colors."""


class SingularityError(PolyliftError, ArithmeticError):
    """A matrix that must be inverted is singular."""


class NumericRegimeError(PolyliftError):
    """A numeric routine was asked to work outside its regime."""


class SizeGuardError(PolyliftError):
    """An enumeration would exceed the configured size guard."""


class ConstructionFailed(PolyliftError):
    """A seed budget was exhausted while building a certified lift."""

    def __init__(self, message, diagnostics=None):
        super().__init__(message)
        self.diagnostics = diagnostics or {}
