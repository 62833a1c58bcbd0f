"""Exception hierarchy shared across the toolkit.

ValidationError covers bad arguments, malformed input files, and data that
violates a method's preconditions (maps to CLI exit code 2). Anything else
raised at runtime is treated as an execution failure (exit code 1).
"""


class PoiskitError(Exception):
    """Base class for all toolkit errors."""


class ValidationError(PoiskitError):
    """Invalid arguments, malformed files, or violated data preconditions."""


class ParseError(ValidationError):
    """Malformed input file; carries the offending line number when known."""

    def __init__(self, message: str, line: int | None = None):
        if line is not None:
            message = f"line {line}: {message}"
        super().__init__(message)
        self.line = line
