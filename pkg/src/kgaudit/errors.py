"""Exception types shared across the package."""


class KgAuditError(Exception):
    """Base class for all kgaudit errors."""


class ParseError(KgAuditError, ValueError):
    """Malformed input file; carries the offending line number when known."""

    def __init__(self, message: str, line: int | None = None):
        if line is not None:
            message = f"line {line}: {message}"
        super().__init__(message)
        self.line = line


class DomainError(KgAuditError, ValueError):
    """Well-formed input that violates a dataset-level constraint."""


class ArgumentError(KgAuditError, ValueError):
    """Invalid argument passed to an operation."""


class NumericError(KgAuditError, ArithmeticError):
    """Numerical failure: non-convergence, zero variance, overflow."""


class TrainingDiverged(NumericError):
    """Training loss became non-finite."""
