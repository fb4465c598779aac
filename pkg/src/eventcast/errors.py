"""Exception classes shared across the toolkit.

Each class maps to a distinct CLI exit code (see cli.EXIT_CODES).
"""


class EventcastError(Exception):
    """Base class for all toolkit errors."""


class ConfigError(EventcastError):
    """Invalid configuration: bad flag value, missing column, bad range."""


class InputDataError(EventcastError):
    """Malformed input data (bad row, unparseable timestamp, empty line)."""

    def __init__(self, message, line=None):
        if line is not None:
            message = f"line {line}: {message}"
        super().__init__(message)
        self.line = line


class NumericsError(EventcastError):
    """Non-finite value encountered during training or evaluation."""
