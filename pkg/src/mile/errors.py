"""Exception hierarchy shared across the package."""


class MileError(Exception):
    """Base class for all package errors."""


class ConfigError(MileError, ValueError):
    """Invalid configuration value or combination."""


class ShapeError(MileError, ValueError):
    """Array shapes do not agree with the network configuration."""


class TaskMismatchError(MileError, TypeError):
    """Operation is not defined for the ensemble's task."""


class NumericError(MileError, ArithmeticError):
    """A non-finite value appeared in a computation.

    ``index`` locates the offending datum, epoch or step when known.
    """

    def __init__(self, message, index=None):
        super().__init__(message)
        self.index = index


class TrainingError(NumericError):
    """Non-finite loss during MAP optimization; ``index`` is the epoch."""


class DivergenceError(NumericError):
    """Sampler diverged; ``index`` is the step, ``member`` the ensemble member."""

    def __init__(self, message, index=None, member=None, seed=None, eps=None):
        super().__init__(message, index)
        self.member = member
        self.seed = seed
        self.eps = eps


class DataError(MileError, ValueError):
    """Malformed input data; carries 1-based ``row`` and ``column`` when known."""

    def __init__(self, message, row=None, column=None):
        super().__init__(message)
        self.row = row
        self.column = column


class ContainerError(MileError):
    """Base class for model-file errors."""


class ChecksumError(ContainerError):
    pass


class VersionError(ContainerError):
    pass


class TruncatedError(ContainerError):
    pass
