"""HTTP client implementing the four capabilities over the wire protocol.

One retry on transport failures, bounded concurrent in-flight requests,
and generous timeouts for generation (large models are slow).
"""

from __future__ import annotations

import logging
import threading
from dataclasses import dataclass, field
from typing import Any

import requests

from ..errors import BackendError, ContextOverflowError, TransportError
from ..grounding import Detection
from ..types import Embedding
from . import wire
from .base import BackendSet, GenerateRequest

logger = logging.getLogger(__name__)

DEFAULT_GENERATE_TIMEOUT = 120.0
DEFAULT_TIMEOUT = 30.0
DEFAULT_MAX_IN_FLIGHT = 4


@dataclass
class HttpBackendClient:
    """JSON-over-HTTP backend speaking the shared wire protocol."""

    base_url: str
    image_mode: str = "b64"
    timeout: float = DEFAULT_TIMEOUT
    generate_timeout: float = DEFAULT_GENERATE_TIMEOUT
    max_in_flight: int = DEFAULT_MAX_IN_FLIGHT
    session: requests.Session = field(default_factory=requests.Session)

    def __post_init__(self) -> None:
        self.base_url = self.base_url.rstrip("/")
        self._gate = threading.Semaphore(self.max_in_flight)

    def embed_text(self, text: str) -> Embedding:
        body = self._post(wire.EMBED_TEXT_PATH, {"text": text}, self.timeout)
        return wire.decode_embedding(body)

    def embed_image(self, image_ref: str) -> Embedding:
        payload = wire.encode_image_payload(image_ref, self.image_mode)
        body = self._post(wire.EMBED_IMAGE_PATH, payload, self.timeout)
        return wire.decode_embedding(body)

    def detect(self, image_ref: str, condition_text: str) -> list[Detection]:
        payload = wire.encode_image_payload(image_ref, self.image_mode)
        payload["query"] = condition_text
        body = self._post(wire.DETECT_PATH, payload, self.timeout)
        return wire.decode_detections(body)

    def generate(self, request: GenerateRequest) -> str:
        payload = wire.encode_generate_request(request, self.image_mode)
        body = self._post(wire.GENERATE_PATH, payload, self.generate_timeout)
        text = body.get("text")
        if not isinstance(text, str):
            raise BackendError(f"{wire.GENERATE_PATH}: response lacks a 'text' string")
        return text

    def healthz(self) -> dict[str, Any]:
        url = self.base_url + wire.HEALTH_PATH
        try:
            response = self.session.get(url, timeout=self.timeout)
        except requests.RequestException as exc:
            raise TransportError(f"GET {url} failed: {exc}") from exc
        return response.json()

    def backend_set(self) -> BackendSet:
        return BackendSet(text_embedder=self, image_embedder=self,
                          detector=self, generator=self)

    def _post(self, path: str, payload: dict[str, Any], timeout: float) -> dict[str, Any]:
        url = self.base_url + path
        with self._gate:
            response = self._send(url, payload, timeout)
        if response.status_code // 100 != 2:
            message = self._error_message(response)
            if response.status_code == 413 or "context" in message.lower():
                raise ContextOverflowError(f"{path}: {message}")
            raise BackendError(f"{path}: HTTP {response.status_code}: {message}")
        try:
            body = response.json()
        except ValueError as exc:
            raise BackendError(f"{path}: response is not JSON") from exc
        if not isinstance(body, dict):
            raise BackendError(f"{path}: response must be a JSON object")
        return body

    def _send(self, url: str, payload: dict[str, Any], timeout: float) -> requests.Response:
        last_exc: Exception | None = None
        for attempt in range(2):
            try:
                return self.session.post(url, json=payload, timeout=timeout)
            except requests.RequestException as exc:
                last_exc = exc
                if attempt == 0:
                    logger.warning("transport failure on %s, retrying once: %s", url, exc)
        raise TransportError(f"POST {url} failed after retry: {last_exc}") from last_exc

    @staticmethod
    def _error_message(response: requests.Response) -> str:
        try:
            body = response.json()
            if isinstance(body, dict) and isinstance(body.get("error"), str):
                return body["error"]
        except ValueError:
            pass
        return response.text[:200] or "no error body"
