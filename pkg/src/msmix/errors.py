"""Exception hierarchy shared across the package."""


class MsmixError(Exception):
    """Base class for all package errors."""


class DomainError(MsmixError, ValueError):
    """An argument lies outside the domain of an operation."""


class TruncationError(DomainError):
    """A level or pattern does not fit in the current truncation."""


class InvalidPathError(DomainError):
    """A path vector violates the root-bit invariant."""


class DataError(MsmixError):
    """Malformed input data or persisted files."""


class NumericalError(MsmixError):
    """A linear-algebra or sampling step failed numerically."""
