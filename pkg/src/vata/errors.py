"""Exception hierarchy shared across the pipeline.

Three top-level families map onto the CLI exit codes: configuration
problems (2), bad or inconsistent data (3), numeric failures (4).
"""


class VataError(Exception):
    """Base class for all pipeline errors."""

    exit_code = 1


class ConfigError(VataError):
    """Invalid configuration value or config file."""

    exit_code = 2


class DataError(VataError):
    """Malformed, missing, or inconsistent input data."""

    exit_code = 3


class NumericError(VataError):
    """Numeric failure: non-finite values, degenerate systems, divergence."""

    exit_code = 4


# --- data errors -----------------------------------------------------------

class SchemaError(DataError):
    """A required column/field is missing or an unknown one is present."""

    def __init__(self, column: str, message: str | None = None):
        self.column = column
        super().__init__(message or f"schema violation on column {column!r}")


class ParseError(DataError):
    """A cell could not be parsed."""

    def __init__(self, row: int, column: str, message: str | None = None):
        self.row = row
        self.column = column
        super().__init__(message or f"unparseable value at row {row}, column {column!r}")


class DuplicateError(DataError):
    """Duplicate primary key (image id) within one dataset."""


class InvalidPairError(DataError):
    """A pairwise comparison references the same image twice."""


class RangeError(DataError):
    """A value lies outside its documented range."""


class UnknownImageError(DataError):
    """A comparison references an image absent from the index."""


class InsufficientItemsError(DataError):
    """Fewer items than the operation needs."""


class InsufficientClassError(DataError):
    """A class has fewer members than the requested per-class sample."""

    def __init__(self, label, available: int, requested: int):
        self.label = label
        self.available = available
        self.requested = requested
        super().__init__(
            f"class {label!r} has {available} members, need {requested}"
        )


class EmptySampleError(DataError):
    """The sample id list is empty."""


class StratumTooSmallError(DataError):
    """A stratum is too small to split."""


class EmptyModelError(DataError):
    """All model coefficients are zero; nothing to decompose."""


class ShapeError(DataError):
    """Array width does not match the model's input width."""


# --- numeric errors --------------------------------------------------------

class DegenerateDofError(NumericError):
    """n - k_effective - 1 <= 0: adjusted metrics undefined."""


class MapeUndefinedError(NumericError):
    """MAPE undefined because a true value is zero."""


class ConstantColumnError(NumericError):
    """A column is constant where variation is required."""

    def __init__(self, column: str):
        self.column = column
        super().__init__(f"column {column!r} is constant")


class ZeroVarianceError(NumericError):
    """Scores have zero variance; rescaling is undefined."""


class DivergenceError(NumericError):
    """Training produced a non-finite loss."""

    def __init__(self, epoch: int):
        self.epoch = epoch
        super().__init__(f"non-finite loss at epoch {epoch}")


class DegenerateError(NumericError):
    """Degenerate fit input (zero-variance predictor or response)."""
