"""Exception types shared across the package.

The CLI maps these to distinct exit codes, so computational code should
raise the most specific one that applies.
"""


class ConfigError(ValueError):
    """A run configuration is malformed or internally inconsistent."""


class DataValidationError(ValueError):
    """An input file or in-memory structure violates a format invariant."""


class NumericError(ArithmeticError):
    """A numerical routine failed to produce a usable result."""
