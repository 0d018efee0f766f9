from __future__ import annotations


class WattlensError(Exception):
    """Base class for all toolkit errors."""


class SourceError(WattlensError):
    """An error tied to a position in a source text."""

    def __init__(self, message: str, *, line: int | None = None, column: int | None = None):
        self.line = line
        self.column = column
        if line is not None:
            location = f"line {line}" if column is None else f"line {line}, column {column}"
            message = f"{location}: {message}"
        super().__init__(message)
