"""Exception hierarchy shared across the package.

ConfigError and DataError map onto distinct CLI exit codes (2 and 3);
anything else is treated as an internal failure (4).
"""


class DeltanetError(Exception):
    """Base class for all package errors."""


class ConfigError(DeltanetError):
    """Invalid or inconsistent run configuration."""


class DataError(DeltanetError):
    """Input data violates a documented contract."""


class IneligibleUserError(DataError):
    """The user has no observable activity before the requested cutoff."""
