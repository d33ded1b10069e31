"""Exception types shared across the package."""


class FactlogicError(Exception):
    """Base class for all package errors."""


class GroundingError(FactlogicError):
    """A predicate grounding is malformed (arity mismatch, empty slot value)."""


class BackendError(FactlogicError):
    """Transport-level failure talking to an answer backend.

    Carries the offending question so retries or reports can name it.
    """

    def __init__(self, message: str, question: str | None = None):
        super().__init__(message)
        self.question = question


class ProtocolError(FactlogicError):
    """The backend replied, but the reply does not match the wire contract."""


class ConfigError(FactlogicError):
    """Invalid configuration (bad fixture, inconsistent backend settings)."""


class DataError(FactlogicError):
    """A dataset, cache, or artifact file is missing fields or corrupt."""


class ShapeError(FactlogicError):
    """Array shapes disagree with the model's grouping or label set."""


class TrainingError(FactlogicError):
    """Training aborted (non-finite loss, empty split)."""


class ReviewError(FactlogicError):
    """A template review decision is invalid (missing slots, duplicate text)."""
