"""Exception types shared across the package."""


class InvalidInputError(ValueError):
    """An argument violates a documented precondition."""


class DegenerateInputError(InvalidInputError):
    """Input is structurally valid but carries no usable information."""


class NumericError(RuntimeError):
    """A non-finite value surfaced during numeric computation."""


class IncompleteReportError(ValueError):
    """Report inputs do not cover every functionality exactly once."""


class DataError(ValueError):
    """A file or serialized record could not be interpreted."""
