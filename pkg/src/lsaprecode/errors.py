"""Exception hierarchy shared by every module."""


class PrecodeError(Exception):
    """Base class for all errors raised by this package."""


class DimensionError(PrecodeError, ValueError):
    """Array shapes do not match the operation's contract."""


class ContractViolation(PrecodeError, ValueError):
    """An input violates a documented precondition (e.g. non-Hermitian)."""


class NumericalError(PrecodeError, ArithmeticError):
    """Base class for numerical failures (exit code 3 in the CLI)."""


class SingularMatrixError(NumericalError):
    """A matrix that must be invertible / positive definite is not.

    Attributes
    ----------
    condition : float
        Condition-number estimate of the offending matrix (``inf`` if unknown).
    index : tuple or None
        Batch index of the offending matrix, e.g. ``(n, k)``.
    """

    def __init__(self, message, condition=float("inf"), index=None):
        super().__init__(message)
        self.condition = condition
        self.index = index


class FactorizationError(NumericalError):
    """Cholesky factorization failed even after diagonal jitter."""


class DivergenceError(NumericalError):
    """A recursion is diverging (step size outside the convergence region)."""


class ConfigError(PrecodeError, ValueError):
    """Invalid scenario configuration (exit code 2 in the CLI)."""
