"""Exception types shared across the package."""


class TimeRegressionError(ValueError):
    """A state update was requested for a time earlier than its clock."""


class StreamOrderError(ValueError):
    """Event stream violates non-decreasing timestamp order."""

    def __init__(self, index: int, message: str):
        super().__init__(message)
        self.index = index


class ParseError(ValueError):
    """Malformed input file. Carries the offending line number."""

    def __init__(self, path, line: int, message: str):
        super().__init__(f"{path}:{line}: {message}")
        self.path = path
        self.line = line


class ConfigError(ValueError):
    """Invalid, unknown, or inconsistent configuration."""
