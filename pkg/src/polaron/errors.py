"""Exception hierarchy shared by all modules."""


class PolaronError(Exception):
    """Base class for all errors raised by this package."""


class InputError(PolaronError):
    """Malformed or inconsistent input (dimension mismatch, bad config key)."""


class DomainError(PolaronError):
    """Evaluation requested outside the mathematical domain of an operation."""


class NumericError(PolaronError):
    """A numerical procedure failed to converge."""


class ResourceError(PolaronError):
    """A requested computation exceeds the configured memory/cost budget."""
