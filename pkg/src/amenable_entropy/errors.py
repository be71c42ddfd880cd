"""Exception types shared across the package."""


class AmenableEntropyError(Exception):
    """Base class for all package errors."""


class DomainError(AmenableEntropyError, ValueError):
    """An argument lies outside the domain an operation is defined on."""


class ResourceError(AmenableEntropyError, RuntimeError):
    """A computation would exceed a configured size or time budget."""


class InvariantViolation(AmenableEntropyError, AssertionError):
    """A verified postcondition failed; this signals a bug, not bad input."""
