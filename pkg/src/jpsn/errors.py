"""Exception and warning types shared across the package."""


class JpsnError(Exception):
    """Base class for all package errors."""


class DomainError(JpsnError, ValueError):
    """An argument lies outside the mathematical domain of an operation."""


class NumericalError(JpsnError, ArithmeticError):
    """A numerical routine failed (factorization, singular conditioning, ...)."""


class InsufficientDataError(JpsnError, ValueError):
    """Not enough observations to perform the requested computation."""


class ParseError(JpsnError, ValueError):
    """A data file could not be parsed."""

    def __init__(self, message, line=None):
        super().__init__(message if line is None else f"line {line}: {message}")
        self.line = line


class InitializationError(JpsnError, RuntimeError):
    """A sampler could not be started from the requested initial state."""


class DegenerateStepWarning(UserWarning):
    """A track step had zero length; the affected derived entries are marked missing."""
