"""Exception types shared across the package."""


class ShlError(Exception):
    """Base class for all errors raised by :mod:`shl`."""


class InputError(ShlError, ValueError):
    """Invalid argument values, shapes or configuration."""


class FormatError(ShlError, ValueError):
    """A file on disk does not follow the expected format."""


class NumericalError(ShlError, ArithmeticError):
    """A numerical routine produced non-finite values."""
