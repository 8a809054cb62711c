"""Shared exception taxonomy for the teleoperation stack.

Every error raised across module boundaries is one of these types, so
callers (the session loop in particular) can distinguish recoverable
per-frame faults from configuration mistakes that must fail loudly.
"""


class TeleopError(Exception):
    """Base class for all stack-specific errors."""


class DimensionMismatch(TeleopError, ValueError):
    """A vector or matrix has the wrong shape for the chain or operation."""


class NonFiniteInput(TeleopError, ValueError):
    """An input contains NaN or infinity where finite values are required."""


class NearPiRotation(TeleopError, ValueError):
    """Rotation angle too close to pi for a well-conditioned logarithm."""


class SingularMatrix(TeleopError, ValueError):
    """An undamped pseudoinverse was requested at a singular configuration."""


class NotCalibrated(TeleopError, RuntimeError):
    """Retargeting was attempted before an anchor pair was captured."""


class AlreadyCalibrated(TeleopError, RuntimeError):
    """A second calibration was attempted without an explicit re-anchor."""


class EmptyLibrary(TeleopError, RuntimeError):
    """Reference selection was attempted on an empty pose library."""


class ChainFileError(TeleopError, ValueError):
    """A kinematic chain description file is malformed."""

    def __init__(self, message: str, line: int | None = None):
        self.line = line
        if line is not None:
            message = f"line {line}: {message}"
        super().__init__(message)


class TraceFormatError(TeleopError, ValueError):
    """A teleoperation trace file is malformed."""

    def __init__(self, message: str, line: int | None = None):
        self.line = line
        if line is not None:
            message = f"line {line}: {message}"
        super().__init__(message)


class LibraryFormatError(TeleopError, ValueError):
    """A reference pose library file is malformed."""

    def __init__(self, message: str, line: int | None = None):
        self.line = line
        if line is not None:
            message = f"line {line}: {message}"
        super().__init__(message)


class ConfigError(TeleopError, ValueError):
    """A session configuration file is missing, malformed, or out of range."""


class ParseError(TeleopError, ValueError):
    """A wire message could not be decoded."""

    def __init__(self, message: str, offset: int = 0):
        self.offset = offset
        super().__init__(f"byte {offset}: {message}")


class PortInUse(TeleopError, OSError):
    """The gateway listen port is already bound."""
