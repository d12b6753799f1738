"""HTTP server hosting any BackendSet over the wire protocol.

Used by the ``serve-mock`` CLI command and by the protocol conformance
tests. Built on the stdlib threading server so tests can run it
in-process on an ephemeral port.
"""

from __future__ import annotations

import json
import logging
import tempfile
import threading
from http.server import BaseHTTPRequestHandler, ThreadingHTTPServer
from pathlib import Path
from typing import Any, Callable

from ..errors import BackendFailure, NearshotError
from . import wire
from .base import BackendSet

logger = logging.getLogger(__name__)


class BackendServer:
    """Serves a BackendSet; endpoints for absent capabilities return 503."""

    def __init__(self, backends: BackendSet, host: str = "127.0.0.1", port: int = 0,
                 scratch_dir: str | Path | None = None):
        self.backends = backends
        self.scratch_dir = Path(scratch_dir or tempfile.mkdtemp(prefix="nearshot_wire_"))
        handler = _make_handler(backends, self.scratch_dir)
        self._httpd = ThreadingHTTPServer((host, port), handler)
        self._thread: threading.Thread | None = None

    @property
    def address(self) -> str:
        host, port = self._httpd.server_address[:2]
        return f"http://{host}:{port}"

    def start(self) -> "BackendServer":
        self._thread = threading.Thread(target=self._httpd.serve_forever, daemon=True)
        self._thread.start()
        return self

    def serve_forever(self) -> None:
        logger.info("serving backends on %s", self.address)
        self._httpd.serve_forever()

    def stop(self) -> None:
        self._httpd.shutdown()
        self._httpd.server_close()
        if self._thread is not None:
            self._thread.join(timeout=5)

    def __enter__(self) -> "BackendServer":
        return self.start()

    def __exit__(self, *exc_info) -> None:
        self.stop()


def _make_handler(backends: BackendSet, scratch_dir: Path) -> type[BaseHTTPRequestHandler]:
    routes: dict[str, Callable[[dict[str, Any]], dict[str, Any]]] = {
        wire.EMBED_TEXT_PATH: lambda body: _embed_text(backends, body),
        wire.EMBED_IMAGE_PATH: lambda body: _embed_image(backends, body, scratch_dir),
        wire.DETECT_PATH: lambda body: _detect(backends, body, scratch_dir),
        wire.GENERATE_PATH: lambda body: _generate(backends, body, scratch_dir),
    }

    class Handler(BaseHTTPRequestHandler):
        protocol_version = "HTTP/1.1"

        def log_message(self, fmt: str, *args: Any) -> None:
            logger.debug("wire: " + fmt, *args)

        def do_GET(self) -> None:
            if self.path != wire.HEALTH_PATH:
                self._reply(404, {"error": f"unknown path {self.path}"})
                return
            self._reply(200, {
                "status": "ok",
                "capabilities": {
                    "text_embedder": backends.text_embedder is not None,
                    "image_embedder": backends.image_embedder is not None,
                    "detector": backends.detector is not None,
                    "generator": backends.generator is not None,
                },
            })

        def do_POST(self) -> None:
            route = routes.get(self.path)
            if route is None:
                self._reply(404, {"error": f"unknown path {self.path}"})
                return
            try:
                length = int(self.headers.get("Content-Length", "0"))
                raw = self.rfile.read(length)
                body = json.loads(raw.decode("utf-8")) if raw else {}
                if not isinstance(body, dict):
                    raise wire.WireFormatError("request body must be a JSON object")
            except (ValueError, UnicodeDecodeError) as exc:
                self._reply(400, {"error": f"invalid JSON body: {exc}"})
                return
            try:
                self._reply(200, route(body))
            except wire.WireFormatError as exc:
                self._reply(400, {"error": str(exc)})
            except _CapabilityMissing as exc:
                self._reply(503, {"error": str(exc)})
            except BackendFailure as exc:
                self._reply(502, {"error": str(exc)})
            except NearshotError as exc:
                self._reply(400, {"error": str(exc)})
            except Exception as exc:  # keep the server alive on bugs
                logger.exception("unhandled error serving %s", self.path)
                self._reply(500, {"error": f"internal error: {exc}"})

        def _reply(self, status: int, body: dict[str, Any]) -> None:
            data = json.dumps(body).encode("utf-8")
            self.send_response(status)
            self.send_header("Content-Type", "application/json; charset=utf-8")
            self.send_header("Content-Length", str(len(data)))
            self.end_headers()
            self.wfile.write(data)

    return Handler


class _CapabilityMissing(NearshotError):
    pass


def _require(capability: Any, name: str) -> Any:
    if capability is None:
        raise _CapabilityMissing(f"capability {name!r} is not configured on this server")
    return capability


def _embed_text(backends: BackendSet, body: dict[str, Any]) -> dict[str, Any]:
    text = body.get("text")
    if not isinstance(text, str) or not text:
        raise wire.WireFormatError("'text' must be a non-empty string")
    embedder = _require(backends.text_embedder, "text_embedder")
    return wire.encode_embedding(embedder.embed_text(text))


def _embed_image(backends: BackendSet, body: dict[str, Any], scratch: Path) -> dict[str, Any]:
    image_ref = wire.decode_image_payload(body, scratch)
    embedder = _require(backends.image_embedder, "image_embedder")
    return wire.encode_embedding(embedder.embed_image(image_ref))


def _detect(backends: BackendSet, body: dict[str, Any], scratch: Path) -> dict[str, Any]:
    query = body.get("query")
    if not isinstance(query, str) or not query:
        raise wire.WireFormatError("'query' must be a non-empty string")
    image_ref = wire.decode_image_payload(body, scratch)
    detector = _require(backends.detector, "detector")
    return wire.encode_detections(detector.detect(image_ref, query))


def _generate(backends: BackendSet, body: dict[str, Any], scratch: Path) -> dict[str, Any]:
    request = wire.decode_generate_request(body, scratch)
    generator = _require(backends.generator, "generator")
    return {"text": generator.generate(request)}
