"""Exception hierarchy for the nearshot pipeline.

Two broad families matter for exit-code mapping in the CLI: ``DataError``
(bad inputs, malformed datasets, impossible configurations) and
``BackendFailure`` (a model backend misbehaved or was unreachable).
Everything else derives from ``NearshotError`` directly.
"""

from __future__ import annotations


class NearshotError(Exception):
    """Base class for all errors raised by this package."""


class DataError(NearshotError):
    """Input data or configuration is invalid (CLI exit code 2)."""


class UnknownLabelError(DataError):
    """A condition name outside the fixed label vocabulary."""


class InvalidParamsError(DataError):
    """Parameters violate an operation's preconditions."""


class DatasetFormatError(DataError):
    """A dataset file (CSV/JSONL/manifest) does not match its schema."""


class InsufficientDataError(DataError):
    """Fewer than two complete pairs available for correlation."""


class InsufficientClassExamplesError(DataError):
    """A label cannot field both classes in its candidate pool."""

    def __init__(self, label: str, message: str | None = None):
        self.label = label
        super().__init__(message or f"label {label!r} lacks a positive or negative candidate")


class DimensionMismatchError(NearshotError):
    """Vector operands have different dimensionality."""


class ZeroNormVectorError(NearshotError):
    """A zero-norm embedding reached cosine similarity.

    This signals a degenerate embedding from a backend; it must never be
    silently treated as similarity 0.
    """


class EmptyInputError(NearshotError):
    """An operation that requires at least one element got none."""


class MissingEmbeddingError(NearshotError):
    """A similarity channel required by the modality is absent."""


class EmptyPoolError(DataError):
    """Shot selection was invoked with an empty candidate pool."""


class NoDetectionsError(NearshotError):
    """Region selection was invoked with an empty detection list."""


class BoxOutsideImageError(DataError):
    """A crop box does not intersect the image bounds."""


class ImageDecodeFailureError(DataError):
    """An image file could not be opened or decoded."""


class ZeroShotsError(DataError):
    """Prompt assembly with zero shots is rejected."""


class MissingImageError(DataError):
    """An image-bearing template was given a record without an image."""


class PromptBudgetExceededError(DataError):
    """The assembled prompt text exceeds the character budget."""


class LengthMismatchError(DataError):
    """Predictions and gold labels have different lengths."""


class EmptyConfusionError(DataError):
    """Metrics requested on a confusion matrix with no classified examples."""


class BackendFailure(NearshotError):
    """Base class for model-backend errors (CLI exit code 3)."""


class BackendError(BackendFailure):
    """The backend reported an application-level error."""


class TransportError(BackendFailure):
    """The backend could not be reached or the connection failed."""


class ContextOverflowError(BackendError):
    """The generation request exceeded the backend's context length."""
