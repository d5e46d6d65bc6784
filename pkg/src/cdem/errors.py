"""Exception taxonomy shared by all cdem modules."""

from __future__ import annotations


class CdemError(Exception):
    """Base class for all errors raised by this package."""


class FormatError(CdemError):
    """A file on disk does not conform to the expected layout."""


class DataError(CdemError):
    """Well-formed input carries values that violate a data contract."""


class DegenerateDataError(DataError):
    """Data is structurally valid but numerically unusable (zero variance, zero rows)."""


class ConfigError(CdemError):
    """A configuration value or combination of values is invalid."""


class NumericError(CdemError):
    """A numerical routine failed to produce a usable result."""
