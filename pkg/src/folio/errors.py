"""Exception hierarchy shared by all folio modules.

Exit-code mapping used by the CLI: usage / IO problems exit 2,
algorithmic failures (anything below) exit 1.
"""

from __future__ import annotations


class FolioError(Exception):
    """Base class for all folio errors."""


class InvalidInputError(FolioError):
    """An argument violates a documented precondition."""


class MalformedAnnotationError(FolioError):
    """Annotation PNG contains a color outside the label table."""

    def __init__(self, message: str, x: int | None = None, y: int | None = None):
        super().__init__(message)
        self.x = x
        self.y = y


class DegenerateResultError(FolioError):
    """An iterative method collapsed to a useless result (e.g. empty contour)."""

    def __init__(self, message: str, iterations: int = 0):
        super().__init__(message)
        self.iterations = iterations


class InfeasibleDomainError(FolioError):
    """No valid patch source exists for the requested inpainting domain."""


class NumericalFailureError(FolioError):
    """A linear solve finished but did not meet the residual contract."""

    def __init__(self, message: str, residual: float = float("nan")):
        super().__init__(message)
        self.residual = residual


class IllPosedError(FolioError):
    """The assembled system has no unique solution (unpinned pure-Neumann blocks)."""
