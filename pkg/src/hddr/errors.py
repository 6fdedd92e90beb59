"""Exception taxonomy shared across the package.

Validation errors signal bad inputs (CLI exit code 2); solver errors signal
a computation that could not produce a usable result (CLI exit code 3).
"""

from __future__ import annotations


class HddrError(Exception):
    """Base class for all package-specific errors."""


class ValidationError(HddrError):
    """Invalid user input: malformed dataset, bad column, bad option."""


class LengthMismatchError(ValidationError):
    pass


class NonFiniteError(ValidationError):
    def __init__(self, where: str, row: int, col: int | None = None):
        self.where = where
        self.row = row
        self.col = col
        loc = f"row {row}" if col is None else f"row {row}, column {col}"
        super().__init__(f"non-finite value in {where} at {loc}")


class NonBinaryExposureError(ValidationError):
    def __init__(self, row: int):
        self.row = row
        super().__init__(f"exposure must be 0/1 for a logistic exposure model; "
                         f"offending value at row {row}")


class NonBinaryOutcomeError(ValidationError):
    def __init__(self, row: int):
        self.row = row
        super().__init__(f"outcome must be 0/1 for a logistic outcome model; "
                         f"offending value at row {row}")


class InvalidProbabilityError(ValidationError):
    pass


class FoldTooSmallError(ValidationError):
    pass


class WrongLinkError(ValidationError):
    pass


class CsvParseError(ValidationError):
    def __init__(self, message: str, line: int, col: int | None = None):
        self.line = line
        self.col = col
        loc = f"line {line}" if col is None else f"line {line}, column {col}"
        super().__init__(f"{message} ({loc})")


class MissingColumnError(ValidationError):
    def __init__(self, column: str):
        self.column = column
        super().__init__(f"required column not found: {column!r}")


class SolverError(HddrError):
    """A model fit or test statistic could not be computed."""


class ZeroVarianceError(SolverError):
    pass


class SupportTooLargeError(SolverError):
    pass


class UnionTooLargeError(SolverError):
    pass
