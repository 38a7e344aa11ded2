"""Exception and warning types shared across the package."""


class SmallCellError(Exception):
    """Base class for all package errors."""


class InvalidArgument(SmallCellError, ValueError):
    pass


class RegimeViolation(SmallCellError):
    """A closed-form probability left [0, 1]; the approximation regime does not hold."""

    def __init__(self, message, value=None):
        super().__init__(message)
        self.value = value


class UnsupportableVelocity(SmallCellError):
    """Handover overhead exceeds the bytes a user can move through one cell.

    Raised when a denominator of the form ``P * L**(1-beta) * C_h / v - mu * s_h``
    is non-positive, i.e. the speed is beyond the velocity limit for that power.
    """

    def __init__(self, message, speed=None, label=None):
        super().__init__(message)
        self.speed = speed
        self.label = label


class PreconditionError(SmallCellError):
    """A hypothesis of a closed-form result does not hold."""


class InsufficientPowerBudget(PreconditionError):
    pass


class UnsupportedDimension(SmallCellError):
    pass


class ConfigError(SmallCellError):
    pass


class InsufficientData(SmallCellError):
    pass


class ApproximationWarning(UserWarning):
    """The inputs sit outside the range where a linearisation is accurate."""
