"""Backend capability contracts.

All model inference sits behind four capabilities: text embedding, image
embedding, zero-shot detection, and generation. The pipeline only ever
talks to these protocols, so any capability can be a deterministic mock,
an HTTP client, or an in-process model.
"""

from __future__ import annotations

from dataclasses import dataclass
from typing import Protocol, runtime_checkable

from ..errors import InvalidParamsError
from ..grounding import Detection
from ..prompt import PromptSequence
from ..types import Embedding

DEFAULT_MAX_NEW_TOKENS = 20
DEFAULT_EMBEDDING_DIM = 64


@dataclass(frozen=True)
class GenerateRequest:
    """A prompt plus decoding bounds for the generator capability."""

    segments: PromptSequence
    max_new_tokens: int = DEFAULT_MAX_NEW_TOKENS
    seed: int | None = None

    def __post_init__(self) -> None:
        if self.max_new_tokens < 1:
            raise InvalidParamsError(
                f"max_new_tokens must be >= 1, got {self.max_new_tokens}")


@runtime_checkable
class TextEmbedder(Protocol):
    def embed_text(self, text: str) -> Embedding: ...


@runtime_checkable
class ImageEmbedder(Protocol):
    def embed_image(self, image_ref: str) -> Embedding: ...


@runtime_checkable
class Detector(Protocol):
    def detect(self, image_ref: str, condition_text: str) -> list[Detection]: ...


@runtime_checkable
class Generator(Protocol):
    def generate(self, request: GenerateRequest) -> str: ...


@dataclass(frozen=True)
class BackendSet:
    """The four capability handles; a run may need only a subset."""

    text_embedder: TextEmbedder | None = None
    image_embedder: ImageEmbedder | None = None
    detector: Detector | None = None
    generator: Generator | None = None

    def require(self, *capabilities: str) -> None:
        missing = [c for c in capabilities if getattr(self, c) is None]
        if missing:
            raise InvalidParamsError(
                f"backend set lacks required capabilit{'y' if len(missing) == 1 else 'ies'}: "
                f"{', '.join(missing)}")


@dataclass(frozen=True)
class MockConfig:
    """Seed and embedding size for the deterministic mock backends."""

    seed: int = 0
    embedding_dim: int = DEFAULT_EMBEDDING_DIM
    pooling: str = "mean"

    def __post_init__(self) -> None:
        if self.embedding_dim < 2:
            raise InvalidParamsError(
                f"embedding_dim must be >= 2, got {self.embedding_dim}")
        if self.pooling != "mean":
            raise InvalidParamsError(f"unsupported pooling {self.pooling!r}")
