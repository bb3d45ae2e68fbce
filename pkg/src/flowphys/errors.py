"""Exception types shared across the package.

The CLI maps these onto exit codes: ConfigError -> 2, DataError and
subclasses -> 3, NumericError -> 4.
"""


class FlowPhysError(Exception):
    """Base class for all package errors."""


class ConfigError(FlowPhysError):
    """Invalid parameter value or unusable run configuration."""


class DataError(FlowPhysError):
    """Input data is malformed or inconsistent."""


class ShapeError(DataError):
    """Array dimensions or shapes do not match what the operation needs."""


class LengthError(DataError):
    """Sequence or list has the wrong number of elements."""


class NumericError(FlowPhysError):
    """A computation produced values outside its guaranteed range."""
