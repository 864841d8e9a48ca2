"""Exception types shared across the package."""


class ConfigError(ValueError):
    """Invalid scenario/configuration field. Message names the offending field."""


class SingularMatrixError(ArithmeticError):
    """A matrix that must be invertible is (numerically) singular.

    Carries a condition-number estimate of the offending matrix.
    """

    def __init__(self, message, cond=None):
        if cond is not None:
            message = f"{message} (condition estimate {cond:.3e})"
        super().__init__(message)
        self.cond = cond


class ConditioningError(ArithmeticError):
    """A Hermitian form expected to be positive definite failed its factorization."""


class ProjectionError(RuntimeError):
    """Alternating-projection loop exceeded its iteration cap."""


class BracketError(RuntimeError):
    """Bisection bracket expansion failed to enclose the target."""
