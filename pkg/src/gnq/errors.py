"""Exception types shared by every front end and engine."""

from __future__ import annotations


class GnqError(Exception):
    """Base class for all errors raised by this package."""


class ParseError(GnqError):
    """Malformed input text. Carries a 1-based line and column."""

    def __init__(self, message: str, line: int = 0, column: int = 0, source: str | None = None):
        self.message = message
        self.line = line
        self.column = column
        self.source = source
        where = f"{source}:" if source else ""
        super().__init__(f"{where}{line}:{column}: {message}")


class SchemaError(GnqError):
    """Unknown relation, arity mismatch or similar typing failure."""


class NotGuardedError(GnqError):
    """An input outside the guarded-negation fragment was given to a
    translation that requires it."""


class BlowUpError(GnqError):
    """A construction exceeded its configured node cap."""

    def __init__(self, what: str, cap: int):
        self.cap = cap
        super().__init__(f"blow-up limit: {what} exceeded {cap} nodes")


class StratificationError(GnqError):
    """Recursion through negation."""
