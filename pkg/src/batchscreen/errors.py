"""Exception types shared across the package.

Everything raised on purpose derives from :class:`BatchScreenError` so callers
can catch domain failures without swallowing bugs.
"""

from __future__ import annotations


class BatchScreenError(Exception):
    """Base class for all deliberate failures."""


class LibraryFormatError(BatchScreenError):
    """A candidate library file failed to parse or validate."""


class DegenerateTargetsError(BatchScreenError):
    """Target normalization is impossible (all raw values equal)."""


class PoolExhaustedError(BatchScreenError):
    """A selection was requested but every candidate is already evaluated."""


class IllConditionedKernelError(BatchScreenError):
    """Cholesky factorization failed at every jitter level."""


class NumericError(BatchScreenError):
    """A numeric routine produced a non-finite intermediate."""


class UndefinedMetricError(BatchScreenError):
    """A metric has no defined value for the given inputs."""


class ProtocolViolationError(BatchScreenError):
    """A coordinator/worker exchange broke the wire contract."""


class WorkerUnavailableError(BatchScreenError):
    """A remote worker died, timed out, or refused the connection."""


class SpecValidationError(BatchScreenError):
    """An experiment spec failed validation.

    ``field`` names the offending key so command-line errors can point at it.
    """

    def __init__(self, field: str, message: str):
        self.field = field
        super().__init__(f"spec field '{field}': {message}")


class CampaignAborted(BatchScreenError):
    """A campaign stopped early; ``trace`` holds the completed iterations."""

    def __init__(self, message: str, trace=None):
        self.trace = trace
        super().__init__(message)
