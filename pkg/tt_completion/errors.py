"""
Exception hierarchy for tt_completion.

Each class carries the process exit code the CLI reports for it.
"""
from typing import Optional


class TTCompletionError(Exception):
    """Root of all errors raised by the package."""

    exit_code = 1


class ShapeError(TTCompletionError, ValueError):
    """Invalid shape, rank list, mode index or multi-index."""

    exit_code = 1


class ParseError(TTCompletionError, ValueError):
    """Malformed input file."""

    exit_code = 1

    def __init__(self, message: str, line: Optional[int] = None, path: Optional[str] = None):
        self.line = line
        self.path = path
        where = ""
        if path is not None:
            where += f"{path}"
        if line is not None:
            where += f":{line}" if where else f"line {line}"
        super().__init__(f"{where}: {message}" if where else message)


class NumericalFailureError(TTCompletionError, ArithmeticError):
    """SVD non-convergence or non-finite iterates."""

    exit_code = 2


class ResourceCapError(TTCompletionError, MemoryError):
    """A dense materialisation would exceed the configured element cap."""

    exit_code = 3

    def __init__(self, message: str, requested: Optional[int] = None, cap: Optional[int] = None):
        self.requested = requested
        self.cap = cap
        super().__init__(message)


def status_for(exc: BaseException) -> str:
    """Result-row status label for an exception raised inside an experiment cell."""
    if isinstance(exc, NumericalFailureError):
        return "numerical_failure"
    if isinstance(exc, ResourceCapError):
        return "resource_cap"
    return "error"


STATUS_EXIT_CODES = {
    "ok": 0,
    "error": 1,
    "numerical_failure": 2,
    "resource_cap": 3,
}
