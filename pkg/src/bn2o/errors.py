"""Exception types shared across the package."""

from __future__ import annotations


class BN2OError(Exception):
    """Base class for every error raised by this package."""


class ParseError(BN2OError, ValueError):
    """Malformed or invalid network/case text.

    ``line`` and ``column`` are 1-based and may be ``None`` when the problem
    is not tied to a single location.
    """

    def __init__(self, message: str, line: int | None = None, column: int | None = None):
        self.message = message
        self.line = line
        self.column = column
        super().__init__(str(self))

    def __str__(self) -> str:
        if self.line is None:
            return self.message
        if self.column is None:
            return f"line {self.line}: {self.message}"
        return f"line {self.line}, column {self.column}: {self.message}"


class ZeroEvidence(BN2OError):
    """The observed evidence has probability zero under the network."""


class CapExceeded(BN2OError):
    """An engine refused an input that exceeds its configured size limit."""


class TooManyPositiveFindings(CapExceeded):
    pass


class TooManyDiseases(CapExceeded):
    pass
