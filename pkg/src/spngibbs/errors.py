"""Exception types shared across the package."""


class SpnError(Exception):
    """Base class for errors raised by this package."""


class GraphFormatError(SpnError, ValueError):
    """A serialized graph payload is malformed.

    Carries ``position`` (byte offset into the payload) when the underlying
    parser could locate the problem, else ``None``.
    """

    def __init__(self, message, position=None):
        if position is not None:
            message = f"{message} (at byte offset {position})"
        super().__init__(message)
        self.position = position


class SupportError(SpnError, ValueError):
    """A data value lies outside the support of a leaf family."""


class BookkeepingError(SpnError, RuntimeError):
    """Internal state accounting was driven into an impossible configuration.

    Raised on double-detach, attach of an already-attached row, or a
    sufficient-statistic count going negative.  Always indicates a bug in the
    caller, never bad data.
    """


class DataFormatError(SpnError, ValueError):
    """A data file or schema could not be ingested."""


class NumericError(SpnError, ArithmeticError):
    """A numeric routine produced a non-finite or impossible value."""
