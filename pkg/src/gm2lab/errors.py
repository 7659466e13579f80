"""Exception hierarchy shared by every module."""


class Gm2Error(Exception):
    """Base class for all package errors."""


class InvalidObjectiveError(Gm2Error, ValueError):
    pass


class InvalidPresetError(Gm2Error, ValueError):
    pass


class InadmissibleParametersError(Gm2Error, ValueError):
    """Raised when a parameter set violates a named constraint."""

    def __init__(self, constraint, message=None):
        self.constraint = constraint
        super().__init__(message or f"violated constraint: {constraint}")


class InitializationUndefinedError(Gm2Error, ValueError):
    pass


class NumericalFailureError(Gm2Error, ArithmeticError):
    """A non-finite value appeared; `index` is the iteration that produced it."""

    def __init__(self, index, message=None):
        self.index = index
        super().__init__(message or f"non-finite value at iteration {index}")


class IntegrationDivergedError(NumericalFailureError):
    """Integrator hit a non-finite state. `last_time` is the last finite time."""

    def __init__(self, index, last_time, message=None):
        self.last_time = last_time
        super().__init__(index, message or f"integration diverged after t={last_time!r}")


class SingularTimeError(Gm2Error, ValueError):
    pass


class StepIndexError(Gm2Error, IndexError):
    pass


class UnsupportedPathError(Gm2Error, ValueError):
    pass


class InternalConsistencyError(Gm2Error, AssertionError):
    pass


class MissingOptimumError(Gm2Error, ValueError):
    pass


class DimensionError(Gm2Error, ValueError):
    pass


class ConfigError(Gm2Error, ValueError):
    """Bad experiment configuration. `line` and `field` locate the problem when known."""

    def __init__(self, message, line=None, field=None):
        self.line = line
        self.field = field
        super().__init__(message)
