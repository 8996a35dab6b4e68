"""Exception hierarchy shared by every module."""


class ToprankError(Exception):
    """Base class for all package errors."""


class InputError(ToprankError, ValueError):
    """Rejected input: bad shape, bad rate, single-class sample, ties where ranks are required."""


class NumericalError(ToprankError, ArithmeticError):
    """A numerical routine failed to reach its tolerance or produced an impossible value."""


class ConsistencyError(ToprankError):
    """Two independent computation routes for the same quantity disagree."""

    def __init__(self, message, first=None, second=None):
        super().__init__(message)
        self.first = first
        self.second = second
