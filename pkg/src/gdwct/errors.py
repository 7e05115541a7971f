"""Exception types shared across the package."""


class ShapeError(ValueError):
    """Operand shapes are incompatible for the requested operation."""


class GroupDivisibilityError(ShapeError):
    """Channel count is not divisible by the requested group count."""


class ArgumentError(ValueError):
    """An argument violates a documented precondition."""


class DegenerateSampleError(ValueError):
    """Too few samples to estimate a covariance (divisor N-1 would be <= 0)."""


class ConvergenceError(RuntimeError):
    """The Jacobi eigensolver failed to converge within the sweep budget."""


class ConfigError(ValueError):
    """A config file could not be parsed into a valid TrainConfig."""

    def __init__(self, message, line=None):
        if line is not None:
            message = f"line {line}: {message}"
        super().__init__(message)
        self.line = line


class FormatError(ValueError):
    """An input file is not in the supported format."""


class CheckpointError(ValueError):
    """A checkpoint file is corrupt or incompatible."""


class AbortStepError(RuntimeError):
    """A training step produced a non-finite gradient or loss."""
