"""Exception types shared across the package."""

from __future__ import annotations


class FoodwatchError(Exception):
    """Base class for all domain errors."""


class ParseError(FoodwatchError):
    """Raised when an input document is not well-formed."""


class ValidationError(FoodwatchError):
    """Raised when a document parses but breaks a model invariant.

    Carries the path of the first offending node and, when produced by a
    full validation pass, the complete issue report.
    """

    def __init__(self, message: str, path: str | None = None, report: list | None = None):
        super().__init__(message)
        self.path = path
        self.report = report or []


class OverlayError(FoodwatchError):
    """Overlay references a space that does not exist (or removes the root)."""


class UnknownSpace(FoodwatchError):
    pass


class UnknownBadge(FoodwatchError):
    pass


class InvalidTarget(FoodwatchError):
    """Reassignment target is not an area node."""


class AuthFailed(FoodwatchError):
    """Authentication failure; message is identical for unknown source and bad key."""


class UnpublishedViolation(FoodwatchError):
    """A violation without reported_at was offered to the status engine."""


class ConfigError(FoodwatchError):
    pass


class InvalidDuration(FoodwatchError):
    """Nominal activity duration must be positive."""


class StartupError(FoodwatchError):
    pass


class CorruptLog(FoodwatchError):
    """Journal corruption before the final record; carries the 1-based line number."""

    def __init__(self, message: str, line_no: int):
        super().__init__(message)
        self.line_no = line_no
