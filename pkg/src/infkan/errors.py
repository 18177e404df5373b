"""Exception hierarchy shared across the package."""


class InfKanError(Exception):
    """Base class for all package errors."""


class ShapeError(InfKanError, ValueError):
    pass


class NumericError(InfKanError, ArithmeticError):
    pass


class DataError(InfKanError, ValueError):
    pass


class FormatError(DataError):
    """Malformed input file. Carries the offending row/column when known."""

    def __init__(self, message, row=None, col=None):
        where = []
        if row is not None:
            where.append(f"row {row}")
        if col is not None:
            where.append(f"col {col}")
        if where:
            message = f"{message} ({', '.join(where)})"
        super().__init__(message)
        self.row = row
        self.col = col


class UnsupportedError(InfKanError, NotImplementedError):
    pass


class DomainError(InfKanError, ValueError):
    pass


class UsageError(InfKanError):
    pass


class DivergedError(InfKanError):
    """Training produced a non-finite loss.

    ``last_good_epoch`` is the last epoch whose records are trustworthy
    (-1 if divergence happened during the first epoch).
    """

    def __init__(self, message, last_good_epoch=-1, records=None):
        super().__init__(message)
        self.last_good_epoch = last_good_epoch
        self.records = records or []
