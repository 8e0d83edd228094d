"""Exception types shared across the package.

The CLI maps these onto distinct exit codes, so keep the hierarchy flat
and the meanings disjoint.
"""


class EgaError(Exception):
    """Base class for errors raised by this package."""


class ConfigError(EgaError):
    """Invalid or inconsistent run configuration."""


class DataFormatError(EgaError):
    """Malformed, truncated, or mislabeled data or parameter file."""


class VariantMismatchError(DataFormatError):
    """Parameter file holds a different adapter variant than expected."""


class DegenerateNormError(EgaError):
    """Near-zero vector where a unit vector is required."""


class NumericError(EgaError):
    """Non-finite values or a failed numeric invariant at runtime."""
