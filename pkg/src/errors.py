"""
Exception hierarchy for trace-posets.

Every error raised on purpose by the library derives from TracePosetError so
the CLI can map it to an exit code. Verification failures are never raised;
they are returned as reports.
"""

from typing import Any, Optional


class TracePosetError(Exception):
    """Base class for all library errors."""


class UsageError(TracePosetError, ValueError):
    """Invalid parameters, mismatched ground sets, malformed input documents."""


class SchemaError(UsageError):
    """A JSON document (family, poset, witness, catalog) does not match its schema."""


class CapabilityError(TracePosetError):
    """The request lies outside the documented computational envelope."""


class UncertifiedError(TracePosetError):
    """
    A parameter could not be certified within the requested range.

    Attributes:
        lower_bound: the best value that was certified before giving up
    """

    def __init__(self, message: str, lower_bound: int):
        super().__init__(message)
        self.lower_bound = lower_bound


class BudgetExhausted(TracePosetError):
    """
    A time or node budget ran out before the computation finished.

    Attributes:
        partial: whatever partial result the computation had (may be None)
    """

    def __init__(self, message: str, partial: Optional[Any] = None):
        super().__init__(message)
        self.partial = partial


class IntegrityError(TracePosetError):
    """Conflicting exact catalog values, or a witness blob that does not match its hash."""
