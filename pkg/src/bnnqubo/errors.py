"""Exception types shared across the package.

Each class maps onto one CLI exit code (see :mod:`bnnqubo.cli`).
"""


class BnnQuboError(Exception):
    """Base class for all package errors."""


class DimensionError(BnnQuboError, ValueError):
    """Assignment, weight or dataset shape does not match its counterpart."""


class CapacityError(BnnQuboError):
    """Problem too large for an exhaustive method or a requested sample size."""


class UnsupportedFanInError(BnnQuboError, ValueError):
    """A layer fan-in is not of the form 2**n - 1."""


class TieError(BnnQuboError, ValueError):
    """``sign`` was asked for the sign of zero."""


class ParseError(BnnQuboError, ValueError):
    """Malformed input file; the message carries line/field context."""

    def __init__(self, message, line=None, source=None):
        self.line = line
        self.source = source
        where = []
        if source is not None:
            where.append(str(source))
        if line is not None:
            where.append(f"line {line}")
        prefix = ":".join(where)
        super().__init__(f"{prefix}: {message}" if prefix else message)


class EmbeddingNotFound(BnnQuboError):
    """Minor embedding search gave up.

    ``partial`` holds the largest partial placement seen over all attempts.
    """

    def __init__(self, message, partial=None):
        super().__init__(message)
        self.partial = partial or {}
