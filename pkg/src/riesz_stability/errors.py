"""Exception types shared across the package."""


class ParameterError(ValueError):
    """Invalid input or configuration (bad dimension, inadmissible radii, ...)."""


class ConsistencyError(RuntimeError):
    """An internal certified property failed; indicates a bug, not bad data."""


class ConvergenceError(RuntimeError):
    """An iterative solver or quadrature did not reach the requested tolerance."""

    def __init__(self, message, achieved=None, best=None):
        super().__init__(message)
        self.achieved = achieved
        self.best = best
