"""Exception hierarchy shared by every module.

The CLI maps these onto exit codes: ``DomainError`` is a usage problem (2),
``FormatError`` an input-format problem (3) and ``NumericalError`` a
numerical failure (4).
"""


class CircuitError(Exception):
    """Base class for all package errors."""


class DomainError(CircuitError, ValueError):
    """An argument lies outside the domain of the operation."""


class FormatError(CircuitError, ValueError):
    """A file or data layout could not be interpreted."""


class NumericalError(CircuitError, ArithmeticError):
    """A numerical procedure failed to produce a trustworthy result."""

    def __init__(self, message, best_residuals=None):
        super().__init__(message)
        self.best_residuals = best_residuals


class GrowthOverflowError(NumericalError):
    """The state grew past the representable range during integration."""

    def __init__(self, message, time_reached):
        super().__init__(message)
        self.time_reached = time_reached


class NotFoundError(NumericalError):
    """A bracketed search found no sign change."""
