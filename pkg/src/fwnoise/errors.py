"""Exception hierarchy shared by all modules."""


class FwnError(Exception):
    """Base class for library errors."""


class DomainError(FwnError, ValueError):
    """An argument lies outside the mathematical domain of an operation."""


class ConfigurationError(FwnError, ValueError):
    """Inputs are individually valid but do not fit together."""


class ContractError(FwnError, TypeError):
    """An integrand or driver of the wrong kind was supplied."""


class AccuracyError(FwnError, ArithmeticError):
    """A numerical routine could not reach its error target."""

    def __init__(self, message, estimate=None, error=None):
        super().__init__(message)
        self.estimate = estimate
        self.error = error


class NumericError(FwnError, ArithmeticError):
    """A factorization or spectral step failed numerically."""


class DivergenceError(FwnError, ArithmeticError):
    """Picard iterates stopped contracting."""
