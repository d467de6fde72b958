"""Exception types shared across the package.

The command line maps these onto exit codes: configuration problems exit
with 2, data problems with 3, numerical failures with 4.
"""


class ConfigError(ValueError):
    """Invalid configuration value, unknown scenario or estimator name."""


class DataError(ValueError):
    """Input data cannot support the requested operation."""


class NumericalError(RuntimeError):
    """A numerical routine failed to converge or left its domain."""
