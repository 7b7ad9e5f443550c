"""Exception hierarchy shared by the ingestion, modelling and CLI layers."""


class ReciprecError(Exception):
    """Base class for all package errors."""


class DataError(ReciprecError):
    """Input data violates a format or domain rule."""


class ParseError(DataError):
    """A CSV row could not be parsed."""

    def __init__(self, message, line=None):
        self.line = line
        if line is not None:
            message = f"line {line}: {message}"
        super().__init__(message)


class ValidationError(DataError):
    """Parsed data is well formed but semantically invalid."""


class ConfigError(ReciprecError):
    """Invalid configuration or arguments."""


class CalibrationError(ReciprecError):
    """The synthetic generator could not hit its calibration target."""


class InvariantError(ReciprecError):
    """An internal consistency check failed."""
