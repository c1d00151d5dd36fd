class DmlError(Exception):
    """Base class for every error raised by the return-set toolkit."""


class DomainError(DmlError, ValueError):
    """Mathematically invalid input (zero inverse, zero denominator, violated hypothesis)."""


class UsageError(DmlError, ValueError):
    """Operands that cannot be combined, e.g. different moduli or dimensions."""


class ParseError(DmlError, ValueError):
    """Malformed textual form or instance file."""


class ValidationError(DmlError, ValueError):
    """Well-formed instance that fails semantic validation."""


class ResourceCapError(DmlError, RuntimeError):
    """A configured cap (degree, levels, search range) would be exceeded."""


class UnsupportedError(DmlError, RuntimeError):
    """Input outside the structural class handled exactly; callers fall back to bounded search."""


class ConstructionError(DmlError, RuntimeError):
    """A construction failed its own self-check and was not emitted."""


class InvariantError(DmlError, RuntimeError):
    """An internal cross-check failed."""
