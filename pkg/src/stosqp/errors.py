"""Exception types shared across the package."""


class StosqpError(Exception):
    """Base class for all package-specific errors."""


class DimensionMismatch(StosqpError):
    """Array shapes are inconsistent with the declared problem sizes."""


class SingularSystem(StosqpError):
    """A linear system could not be solved reliably.

    Raised when factorization pivots fall below threshold or a solve
    residual cannot be pushed under tolerance; signals Jacobian rank
    deficiency or reduced-curvature failure.
    """


class NonPositiveTau(StosqpError):
    """A merit-parameter update produced a value <= 0."""


class DivisionByZero(StosqpError):
    """A ratio update was requested with a zero denominator."""


class InvalidInterval(StosqpError):
    """A projection interval has lower bound above upper bound."""


class EmptySchedule(StosqpError):
    """A probability or stepsize schedule is empty."""


class InvalidDimension(StosqpError):
    """A requested problem dimension is out of range."""


class InvalidDelta(StosqpError):
    """A failure probability lies outside (0, 1)."""


class InvalidRange(StosqpError):
    """A scalar parameter lies outside its documented range."""


class InvalidConstant(StosqpError):
    """A problem constant (variance, curvature, bound) is invalid."""


class CurvatureViolation(StosqpError):
    """The reduced Hessian failed the minimum-curvature check."""


class ConfigError(StosqpError):
    """A configuration file failed validation.

    The message names the offending field by its dotted path.
    """


class ExperimentFailure(StosqpError):
    """Too many replications of an experiment failed to complete."""
