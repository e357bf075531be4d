"""Exception types shared across the package."""


class FdlError(Exception):
    """Base class for errors raised by this package."""


class ShapeError(FdlError, ValueError):
    """Tensor dimensions are inconsistent with the requested operation."""


class ConfigError(FdlError, ValueError):
    """A parameter value or declarative description is invalid."""


class NumericError(FdlError, ArithmeticError):
    """A computation produced non-finite values."""
