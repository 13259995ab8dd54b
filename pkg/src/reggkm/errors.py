"""Exception and warning types raised across the package."""


class ReggkmError(Exception):
    """Base class for all package errors."""


class DataError(ReggkmError):
    """Input data could not be used as given."""


class ConstantColumn(DataError):
    def __init__(self, name):
        super().__init__(f"column {name!r} has zero variance")
        self.name = name


class NonFinite(DataError):
    pass


class ParseError(DataError):
    def __init__(self, row, col, value=None):
        msg = f"cannot parse value {value!r} at row {row}, column {col!r}"
        super().__init__(msg)
        self.row = row
        self.col = col


class MissingValue(DataError):
    def __init__(self, row, col):
        super().__init__(f"missing value at row {row}, column {col!r}")
        self.row = row
        self.col = col


class SchemaMismatch(DataError):
    pass


class DimensionMismatch(ReggkmError, ValueError):
    pass


class NumericalError(ReggkmError):
    """A numerical routine failed in a way that cannot be recovered."""


class SingularAfterJitter(NumericalError):
    pass


class CalibrationFailed(NumericalError):
    pass


class NoComparablePairs(ReggkmError):
    pass


class InsufficientEvents(ReggkmError):
    pass


class InvalidPlan(ReggkmError, ValueError):
    pass


class FoldFitFailed(NumericalError):
    def __init__(self, fold, cause=None):
        super().__init__(f"fit on training folds for held-out fold {fold} failed: {cause}")
        self.fold = fold
        self.cause = cause


class AllFitsFailed(NumericalError):
    pass


class NotConverged(UserWarning):
    """Iteration budget exhausted; the last (or best) iterate is returned."""
