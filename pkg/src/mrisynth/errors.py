"""Exception taxonomy shared by all mrisynth modules.

Exit-code mapping for the CLI lives in :mod:`mrisynth.cli`: config errors
exit 1, I/O errors exit 2, data errors exit 3.
"""


class MriSynthError(Exception):
    """Base class for all mrisynth errors."""


class FormatError(MriSynthError):
    """A file is structurally invalid (malformed NIfTI header, truncated data)."""


class UnsupportedError(MriSynthError):
    """The file uses a feature we deliberately do not handle (e.g. RGB voxels, 4D)."""


class DataDomainError(MriSynthError):
    """Values violate a domain constraint (e.g. non-integer labels)."""


class UsageError(MriSynthError):
    """An operation was called with arguments that violate its contract."""


class CoverageError(MriSynthError):
    """A required label is missing from parameters or estimation data."""


class ConfigError(MriSynthError):
    """A configuration file or object is invalid."""
