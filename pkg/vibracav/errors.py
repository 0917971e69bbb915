"""Exception hierarchy shared by the numerical modules and the CLI."""


class VibracavError(Exception):
    """Base class for every error raised by vibracav."""

    def __init__(self, message, diagnostics=None):
        super().__init__(message)
        self.diagnostics = dict(diagnostics or {})


class DomainError(VibracavError, ValueError):
    """Argument outside the domain of a function."""


class AccuracyError(VibracavError, ArithmeticError):
    """A requested tolerance could not be reached.

    ``diagnostics`` carries whatever the caller needs to understand the
    failure: partial sums, number of terms, the offending (m, kappa) pair or
    the tail bound of a truncated table.
    """


class PolynomialOverflowError(AccuracyError):
    """Polynomial recurrence left the floating point range."""


class IntegrationError(AccuracyError):
    """The ODE integrator did not reach the end of the interval."""


class UnphysicalStateError(DomainError):
    """Second moments violate the uncertainty relation."""


class RegimeError(DomainError):
    """Asymptotic formula requested outside its validity regime."""


class InputError(VibracavError, ValueError):
    """Malformed user input: range specs, matrix shapes, flags."""
