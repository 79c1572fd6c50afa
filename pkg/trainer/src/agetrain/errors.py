"""Exception hierarchy.

The CLI maps these to exit codes: configuration and usage problems exit 1,
unreadable or malformed files exit 2, well-formed data that violates a
domain constraint (or a diverging training run) exits 3.
"""


class TrainerError(Exception):
    """Base class for everything raised on purpose by this package."""


class ConfigError(TrainerError):
    """Bad configuration value or file."""


class UsageError(TrainerError):
    """An API precondition was violated by the caller."""


class FormatError(TrainerError):
    """A file exists but cannot be parsed as what it claims to be."""


class DataError(TrainerError):
    """Parsed data violates a domain constraint, or training diverged."""
