from typing import Optional


class SparseCardError(Exception):
    pass


class ValidationError(SparseCardError, ValueError):
    """Input that violates a documented precondition (exit code 2 on the CLI)."""


class DomainError(ValidationError):
    pass


class ClassMembershipError(ValidationError):
    pass


class InstanceParseError(ValidationError):
    def __init__(self, line: int, column: int, message: str) -> None:
        super().__init__(f"line {line}, column {column}: {message}")
        self.line = line
        self.column = column
        self.message = message


class SizeGuardError(SparseCardError):
    """Exhaustive or quadratic routine asked to run past its size guard (exit code 3)."""


class ScaleOverflowError(SparseCardError, OverflowError):
    def __init__(self, message: str, suggested_scale: Optional[int] = None) -> None:
        super().__init__(message)
        self.suggested_scale = suggested_scale


class InternalInvariantError(SparseCardError, AssertionError):
    pass
