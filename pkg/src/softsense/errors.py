"""Exception and warning types shared across the package."""


class SoftSenseError(Exception):
    """Base class for all package errors."""


class DataError(SoftSenseError):
    """Problems with input data (maps to CLI exit code 3)."""


class SchemaError(DataError):
    def __init__(self, column, message=None):
        self.column = column
        super().__init__(message or f"missing required column {column!r}")


class ParseError(DataError):
    def __init__(self, row, column, cell):
        self.row = row
        self.column = column
        self.cell = cell
        super().__init__(f"row {row}, column {column!r}: cannot parse {cell!r} as a number")


class EmptyDataError(DataError):
    pass


class InsufficientDataError(DataError):
    pass


class ModelError(SoftSenseError):
    """Problems fitting, routing or persisting models (CLI exit code 4)."""


class RankDeficientError(ModelError):
    def __init__(self, columns):
        self.columns = tuple(columns)
        super().__init__("design matrix is rank deficient; collinear columns: " + ", ".join(self.columns))


class MissingFeatureError(ModelError, KeyError):
    def __init__(self, feature):
        self.feature = feature
        super().__init__(f"input does not provide feature {feature!r}")

    def __str__(self):
        return self.args[0]


class NoModelError(ModelError):
    pass


class BundleCorruptError(ModelError):
    pass


class BundleVersionError(ModelError):
    pass


class DegenerateWarning(UserWarning):
    """A column had zero variance (or a single bin) and was scored by convention."""
