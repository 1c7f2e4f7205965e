"""
Exception hierarchy for offscreen-tap.

Every error carries the process exit code the CLI maps it to:
2 bad input, 3 training fault, 4 schema mismatch.
"""


class TapError(Exception):
    """Base class for all offscreen-tap errors."""

    exit_code = 1

    def to_dict(self) -> dict[str, object]:
        return {
            "error": type(self).__name__,
            "message": str(self),
            "exit_code": self.exit_code,
        }


class InputError(TapError, ValueError):
    """Invalid input: malformed files, out-of-range values, bad arguments."""

    exit_code = 2


class StreamError(InputError):
    """Rejected IMU stream or frame (non-monotonic / stale timestamps, non-finite values)."""


class AlignmentError(InputError):
    """Feature anchor does not fall inside the signal window."""


class ConfigError(InputError):
    """Invalid or inconsistent configuration."""


class ShapeError(InputError):
    """Tensor shapes do not chain."""


class DatasetError(InputError):
    """Corrupt dataset file. ``line`` is the 1-based line number of the offending row."""

    def __init__(self, message: str, line: int | None = None):
        if line is not None:
            message = f"line {line}: {message}"
        super().__init__(message)
        self.line = line


class TrainingFault(TapError, ArithmeticError):
    """NaN or Inf reached a loss, gradient or parameter."""

    exit_code = 3


class SchemaMismatchError(TapError):
    """A dataset or checkpoint was written with an unsupported schema version."""

    exit_code = 4
