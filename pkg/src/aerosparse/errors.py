"""Exception classes shared across the package.

The CLI maps each class to a distinct exit code, so keep the taxonomy small:
bad input data, numerical breakdown, and inconsistent configuration.
"""


class AeroSparseError(Exception):
    """Base class for all errors raised by this package."""


class DataError(AeroSparseError, ValueError):
    """Invalid or inconsistent input data (files, shapes, non-finite values)."""


class NumericsError(AeroSparseError, ArithmeticError):
    """Numerical breakdown: singular or ill-conditioned systems, divergence."""


class ConfigError(AeroSparseError, ValueError):
    """Invalid configuration or mismatched artifacts."""
