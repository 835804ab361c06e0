"""Exception types shared across the package."""


class NumericalError(RuntimeError):
    """A numerical procedure failed (factorization breakdown, lost definiteness, ...)."""


class ConvergenceError(NumericalError):
    """An iteration exhausted its budget before reaching the requested tolerance."""


class DivergenceError(RuntimeError):
    """A simulated run was aborted because the error covariance trace blew up.

    Carries whatever partial results were accumulated before the abort so
    callers can still inspect or persist them.
    """

    def __init__(self, message, artifacts=None):
        super().__init__(message)
        self.artifacts = artifacts
