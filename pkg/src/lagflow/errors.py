"""Exception hierarchy shared by every lagflow module."""


class LagflowError(Exception):
    """Base class for all library errors."""


class TauZeroUnsupported(LagflowError):
    """tau = 0 (Monge-Ampere) has an unbounded range and is not provided."""


class InvalidTau(LagflowError):
    pass


class NonPositiveEigenvalue(LagflowError):
    pass


class InvalidWindow(LagflowError):
    pass


class NotPositiveDefinite(LagflowError):
    pass


class ProjectionDiverged(LagflowError):
    pass


class GridTooCoarse(LagflowError):
    pass


class UnsupportedDomainPair(LagflowError):
    pass


class ObliquenessLost(LagflowError):
    pass


class NewtonDiverged(LagflowError):
    pass


class ConvexityLost(LagflowError):
    pass


class NotConverged(LagflowError):
    """Raised by :func:`lagflow.flow.run` in strict mode; carries partial data."""

    def __init__(self, message, result=None):
        super().__init__(message)
        self.result = result


class LevelOutOfRange(LagflowError):
    pass


class SingularHessian(LagflowError):
    pass


class NonConvexDual(LagflowError):
    pass


class ConfigError(LagflowError):
    pass
