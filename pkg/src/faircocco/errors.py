"""Exception hierarchy shared across the package.

The CLI maps these onto exit codes: configuration and data problems exit
with 2, numerical failures with 3.
"""


class FaircoccoError(Exception):
    """Base class for all package errors."""


class ConfigError(FaircoccoError):
    """Invalid manifest, CLI arguments, or training configuration."""


class DataError(FaircoccoError):
    """Input data violates a precondition (bad CSV, empty group, ...)."""


class NumericalError(FaircoccoError):
    """A numerical routine failed (solver breakdown, divergence, NaN)."""
