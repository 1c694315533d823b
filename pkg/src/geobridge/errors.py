"""Exception hierarchy shared by the solvers and the command line."""


class GeoBridgeError(Exception):
    """Base class for all package errors."""


class DomainError(GeoBridgeError):
    """A point left the admissible region of a chart."""


class DegenerateMetricError(DomainError):
    """The inverse metric is not symmetric positive-definite at a point."""


class BlowUpError(DomainError):
    """Time integration left the admissible domain or produced non-finite values.

    ``t`` holds the time at which the failure was detected.
    """

    def __init__(self, message, t):
        super().__init__(message)
        self.t = t


class NewtonError(GeoBridgeError):
    """A Newton inversion failed to converge."""


class HypothesisError(GeoBridgeError):
    """The Hopf-Cole hypotheses do not hold for the given chart."""


class ConvergenceError(GeoBridgeError):
    """An iterative solver hit its iteration budget."""


class ConfigError(GeoBridgeError):
    """A scenario configuration failed validation."""
