"""Exception types shared across the package."""


class QLloydError(Exception):
    """Base class for all package errors."""


class RegisterError(QLloydError, ValueError):
    """Register names collide, are missing, or have mismatched dimensions."""


class NotHermitianError(QLloydError, ValueError):
    pass


class PostselectionError(QLloydError, RuntimeError):
    """A postselected outcome had (numerically) zero probability."""


class DimensionError(QLloydError, ValueError):
    """A requested simulation exceeds the configured dimension budget."""


class DataError(QLloydError, ValueError):
    """Malformed input data (ragged rows, zero vectors, bad labels)."""
