"""Shared exception types.

Every failure mode that callers are expected to catch gets its own class;
plain ValueError is reserved for programming errors in arguments.
"""


class WorkbenchError(Exception):
    """Base class for all package-specific errors."""


class TailUndefinedError(WorkbenchError):
    """A table-backed symbol was evaluated past its table under the ERROR tail policy."""


class WeightOverflowError(WorkbenchError):
    """An exact integer weight does not fit into a float."""


class StructureViolationError(WorkbenchError):
    """A matrix claimed to be radial/foldable is not, beyond tolerance."""


class NotBipartiteError(WorkbenchError):
    """Parity witness requested on a graph with an odd cycle."""


class NotMedianError(WorkbenchError):
    """Median validation failed: some triple has no unique triple-interval point."""


class RayTooShortError(WorkbenchError):
    """A base-ray dependent quantity did not stabilize within the available ray."""


class RadiusMismatchError(WorkbenchError):
    """Graph/ball radii inconsistent with the requested operation."""


class TailBoundExceededError(WorkbenchError):
    """Requested tolerance is unreachable with the given truncation."""


class ConvergenceError(WorkbenchError):
    """An iterative solver hit its iteration cap before certification."""


class MaxIterExceededError(ConvergenceError):
    """Bisection ran out of iteration budget; carries the best bracket."""

    def __init__(self, message: str, bracket=None):
        super().__init__(message)
        self.bracket = bracket


class UnsupportedEnvelopeError(WorkbenchError):
    """The integral oracle only knows power-law envelopes."""


class NotRealError(WorkbenchError):
    """A real-sequence test was requested on complex data."""


class SizeLimitError(WorkbenchError):
    """Requested size exceeds the configured maximum."""
