"""Exception types shared across the package."""


class RandredError(Exception):
    """Base class for all package-specific errors."""


class InvalidInputError(RandredError, ValueError):
    """Raised when data passed to a kernel violates its preconditions."""


class InvalidConfigError(RandredError, ValueError):
    """Raised when an operator or experiment configuration is inconsistent."""


class NumericalError(RandredError, RuntimeError):
    """Raised when an iterative kernel fails to produce a usable result."""


class TrainingFailedError(RandredError, RuntimeError):
    """Raised when a training pipeline cannot produce a model."""


class UndefinedMetricError(RandredError, ValueError):
    """Raised when a requested evaluation metric is undefined for the data."""


class ParseError(RandredError, ValueError):
    """Raised on malformed input files; carries the offending line number."""

    def __init__(self, message, line=None):
        if line is not None:
            message = f"line {line}: {message}"
        super().__init__(message)
        self.line = line
