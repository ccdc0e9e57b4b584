"""Exception types shared across the package."""


class NotControllableError(ValueError):
    """(A, B) fails the full-rank controllability test."""


class SteadyStateUnderdeterminedError(ValueError):
    """I - A is singular, so no unique steady state exists for a given input."""


class NumericalFailureError(ArithmeticError):
    """A gradient or iterate became non-finite."""


class NoConvergenceError(RuntimeError):
    """Iterative solver hit its iteration cap."""

    def __init__(self, message, residual=None):
        super().__init__(message)
        self.residual = residual


class CertificateUnavailableError(RuntimeError):
    """Step-size conditions fail, so the regret certificate does not apply."""

    def __init__(self, message, report=None):
        super().__init__(message)
        self.report = report
