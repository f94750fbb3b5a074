"""Exception types shared across the package."""


class ValidationError(ValueError):
    """Malformed game, population, profile or configuration."""


class UnsupportedRuleError(ValidationError):
    """A voting rule was asked to do something it cannot (wrong ballot kind, nonlinear rule...)."""


class SolverError(RuntimeError):
    """A numerical routine failed to converge or to certify its answer.

    The offending residual is kept on ``residual`` so callers can report it.
    """

    def __init__(self, message, residual=None):
        super().__init__(message)
        self.residual = residual
