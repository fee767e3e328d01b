"""Exception hierarchy shared by all martfit modules."""


class MartfitError(Exception):
    """Base class for errors raised by martfit."""


class ValidationError(MartfitError, ValueError):
    """Input data violates a structural invariant (weights, convexity, ordering)."""


class DomainError(MartfitError, ValueError):
    """Argument outside the domain of an operation (probability, time, level)."""


class ParseError(MartfitError, ValueError):
    """Malformed text or CSV input."""
