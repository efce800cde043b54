"""Error classes shared across the package.

The CLI maps each class to a distinct exit code, so raising the right
type here is part of the public contract, not just diagnostics.
"""


class CurimolError(Exception):
    """Base class for all package errors."""


class ValidationError(CurimolError, ValueError):
    """Bad argument or violated data invariant (zero-norm row, bad index, ...)."""


class FormatError(CurimolError):
    """Malformed on-disk file: wrong magic, version, or truncated payload."""


class ConsistencyError(CurimolError):
    """Cross-file or cross-field mismatch (table counts vs manifest, hash drift)."""


class NumericError(CurimolError, ArithmeticError):
    """Non-finite value where a finite one is required."""
