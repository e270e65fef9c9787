"""Exception types shared across the package."""


class ArmloopError(Exception):
    """Base class for errors raised by this package."""


class DimensionError(ArmloopError, ValueError):
    """An array argument has the wrong shape or a non-finite entry."""


class ModelFileError(ArmloopError, ValueError):
    """A robot model file failed to parse or validate.

    Carries the offending line number when one is known.
    """

    def __init__(self, message: str, line: int | None = None):
        self.line = line
        if line is not None:
            message = f"line {line}: {message}"
        super().__init__(message)


class GainsFileError(ArmloopError, ValueError):
    """A gain profile file failed to parse or validate."""

    def __init__(self, message: str, line: int | None = None):
        self.line = line
        if line is not None:
            message = f"line {line}: {message}"
        super().__init__(message)


class DegenerateModelError(ArmloopError, RuntimeError):
    """The mass matrix is numerically singular (condition number too large)."""


class SimulationDiverged(ArmloopError, RuntimeError):
    """Plant integration produced non-finite state or runaway velocity."""

    def __init__(self, message: str, tick: int, last_q=None, last_v=None):
        self.tick = tick
        self.last_q = last_q
        self.last_v = last_v
        super().__init__(f"{message} (tick {tick})")


class DemoFormatError(ArmloopError, ValueError):
    """A recorded demonstration file is malformed or truncated."""

    def __init__(self, message: str, path=None, line: int | None = None):
        self.path = path
        self.line = line
        where = ""
        if path is not None:
            where += f"{path}: "
        if line is not None:
            where += f"line {line}: "
        super().__init__(where + message)


class ProtocolError(ArmloopError, ValueError):
    """A teleop wire message is malformed or violates the protocol."""


class ConfigError(ArmloopError, ValueError):
    """A run configuration file or CLI override is invalid."""
