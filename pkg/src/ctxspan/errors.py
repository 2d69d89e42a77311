"""Exception hierarchy shared by all pipeline stages.

Every error can be rendered as a machine-readable record so batch runs
can skip-and-report individual records instead of dying mid-dataset.
"""

from __future__ import annotations


class PipelineError(Exception):
    """Base class for all errors raised by this package."""

    code = "pipeline"

    def __init__(self, message: str, *, record_id: str | None = None):
        super().__init__(message)
        self.record_id = record_id

    def as_record(self) -> dict:
        rec = {"code": self.code, "message": str(self)}
        if self.record_id is not None:
            rec["record_id"] = self.record_id
        return rec


class ValidationError(PipelineError):
    """Input violates a documented precondition or invariant."""

    code = "validation"


class DataError(PipelineError):
    """A dataset record is malformed (missing fields, bad offsets, ...)."""

    code = "data"


class NotFoundError(PipelineError):
    """Lookup by id failed."""

    code = "not_found"


class StoreError(PipelineError):
    """Chunk store or index I/O failure, with path context."""

    code = "store"


class AlignmentError(PipelineError):
    """Token-count mismatch between series that must be 1:1 aligned.

    Fatal for the affected record; the record is skipped and reported,
    never silently truncated.
    """

    code = "alignment"


class TransportError(PipelineError):
    """A remote endpoint could not be reached. Retriable."""

    code = "transport"

    def __init__(self, message: str, *, endpoint: str, record_id: str | None = None):
        super().__init__(message, record_id=record_id)
        self.endpoint = endpoint

    def as_record(self) -> dict:
        rec = super().as_record()
        rec["endpoint"] = self.endpoint
        return rec


class ProtocolError(PipelineError):
    """A remote endpoint answered with a malformed or out-of-contract payload."""

    code = "protocol"
