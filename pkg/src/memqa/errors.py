"""Exception types shared across the package."""


class MemqaError(Exception):
    """Base class for all errors raised by this package."""


class ShapeError(MemqaError):
    """Operands have incompatible or invalid shapes."""


class NonFiniteError(MemqaError):
    """A forward computation produced NaN or Inf."""


class TapeError(MemqaError):
    """Invalid use of the gradient tape (non-scalar root, reuse, ...)."""


class ConfigError(MemqaError):
    """Invalid configuration value."""


class KBError(MemqaError):
    """Knowledge-base loading or lookup failure."""


class DataError(MemqaError):
    """Malformed dataset record or file."""
