"""Pluggable model backends: contracts, deterministic mocks, HTTP client/server."""

from .base import (
    BackendSet,
    Detector,
    GenerateRequest,
    Generator,
    ImageEmbedder,
    MockConfig,
    TextEmbedder,
)
from .http import HttpBackendClient
from .mock import (
    MockDetector,
    MockGenerator,
    MockImageEmbedder,
    MockTextEmbedder,
    condition_intensity,
    make_mock_backends,
)
from .server import BackendServer

__all__ = [
    "BackendServer",
    "BackendSet",
    "Detector",
    "GenerateRequest",
    "Generator",
    "HttpBackendClient",
    "ImageEmbedder",
    "MockConfig",
    "MockDetector",
    "MockGenerator",
    "MockImageEmbedder",
    "MockTextEmbedder",
    "TextEmbedder",
    "condition_intensity",
    "make_mock_backends",
]
