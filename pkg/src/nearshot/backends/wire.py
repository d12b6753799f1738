"""JSON wire protocol shared by the HTTP client and every server.

All endpoints are POST with JSON bodies (UTF-8):

    /v1/embed/text    {"text": str}                         -> {"vector": [...], "dim": n}
    /v1/embed/image   {"image_b64": str} | {"path": str}    -> {"vector": [...], "dim": n}
    /v1/detect        {"image_b64"|"path", "query": str}    -> {"detections": [{"box": [x0,y0,x1,y1], "score": s}]}
    /v1/generate      {"segments": [...], "max_new_tokens": n, "seed": n?} -> {"text": str}

Errors are non-2xx with ``{"error": str}``. Box coordinates are integers;
all other numbers are JSON doubles. Images travel as base64 payloads or as
server-resolvable paths.
"""

from __future__ import annotations

import base64
import hashlib
from pathlib import Path
from typing import Any

from ..errors import InvalidParamsError
from ..grounding import Detection
from ..prompt import ImageSlot, PromptSequence, TextSegment
from ..types import Embedding
from .base import GenerateRequest

EMBED_TEXT_PATH = "/v1/embed/text"
EMBED_IMAGE_PATH = "/v1/embed/image"
DETECT_PATH = "/v1/detect"
GENERATE_PATH = "/v1/generate"
HEALTH_PATH = "/healthz"


class WireFormatError(InvalidParamsError):
    """A request or response body does not match the protocol schema."""


def encode_image_payload(image_ref: str, mode: str = "b64") -> dict[str, str]:
    if mode == "path":
        return {"path": image_ref}
    if mode == "b64":
        data = Path(image_ref).read_bytes()
        return {"image_b64": base64.b64encode(data).decode("ascii")}
    raise InvalidParamsError(f"unknown image payload mode {mode!r}")


def decode_image_payload(body: dict[str, Any], scratch_dir: str | Path) -> str:
    """Resolve an image payload to a local file path.

    Base64 payloads are materialized under ``scratch_dir`` with a
    content-derived name, so identical payloads map to identical files.
    """
    if "path" in body:
        path = _expect_str(body, "path")
        if not Path(path).exists():
            raise WireFormatError(f"image path does not exist on the server: {path}")
        return path
    if "image_b64" in body:
        raw = _expect_str(body, "image_b64")
        try:
            data = base64.b64decode(raw, validate=True)
        except Exception as exc:
            raise WireFormatError(f"invalid base64 image payload: {exc}") from exc
        scratch = Path(scratch_dir)
        scratch.mkdir(parents=True, exist_ok=True)
        out = scratch / f"wire_{hashlib.sha256(data).hexdigest()[:24]}.bin"
        if not out.exists():
            out.write_bytes(data)
        return str(out)
    raise WireFormatError("image payload needs 'image_b64' or 'path'")


def encode_embedding(embedding: Embedding) -> dict[str, Any]:
    return {"vector": embedding.tolist(), "dim": embedding.dim}


def decode_embedding(body: dict[str, Any]) -> Embedding:
    vector = _expect_list(body, "vector")
    dim = _expect_int(body, "dim")
    if len(vector) != dim:
        raise WireFormatError(f"vector length {len(vector)} != dim {dim}")
    try:
        return Embedding([float(v) for v in vector])
    except (TypeError, ValueError) as exc:
        raise WireFormatError(f"invalid embedding vector: {exc}") from exc


def encode_detections(detections: list[Detection]) -> dict[str, Any]:
    return {
        "detections": [
            {"box": [int(c) for c in d.box], "score": float(d.score)}
            for d in detections
        ]
    }


def decode_detections(body: dict[str, Any]) -> list[Detection]:
    raw = _expect_list(body, "detections")
    detections = []
    for i, item in enumerate(raw):
        if not isinstance(item, dict):
            raise WireFormatError(f"detections[{i}] must be an object")
        box = item.get("box")
        if (not isinstance(box, list) or len(box) != 4
                or not all(isinstance(c, int) and not isinstance(c, bool) for c in box)):
            raise WireFormatError(f"detections[{i}].box must be 4 integers")
        score = item.get("score")
        if not isinstance(score, (int, float)) or isinstance(score, bool):
            raise WireFormatError(f"detections[{i}].score must be a number")
        try:
            detections.append(Detection(box=tuple(box), score=float(score)))
        except ValueError as exc:
            raise WireFormatError(f"detections[{i}]: {exc}") from exc
    return detections


def encode_generate_request(request: GenerateRequest, image_mode: str = "b64") -> dict[str, Any]:
    segments: list[dict[str, Any]] = []
    for segment in request.segments.segments:
        if isinstance(segment, TextSegment):
            segments.append({"type": "text", "text": segment.text})
        else:
            payload: dict[str, Any] = {"type": "image"}
            payload.update(encode_image_payload(segment.image_ref, image_mode))
            segments.append(payload)
    body: dict[str, Any] = {
        "segments": segments,
        "max_new_tokens": request.max_new_tokens,
    }
    if request.seed is not None:
        body["seed"] = request.seed
    return body


def decode_generate_request(body: dict[str, Any], scratch_dir: str | Path) -> GenerateRequest:
    raw_segments = _expect_list(body, "segments")
    max_new_tokens = _expect_int(body, "max_new_tokens")
    seed = body.get("seed")
    if seed is not None and (not isinstance(seed, int) or isinstance(seed, bool)):
        raise WireFormatError("seed must be an integer when present")

    segments: list[ImageSlot | TextSegment] = []
    shot_answers = 0
    for i, item in enumerate(raw_segments):
        if not isinstance(item, dict):
            raise WireFormatError(f"segments[{i}] must be an object")
        kind = item.get("type")
        if kind == "text":
            text = _expect_str(item, "text")
            segments.append(TextSegment(text))
            shot_answers += 1
        elif kind == "image":
            segments.append(ImageSlot(decode_image_payload(item, scratch_dir)))
        else:
            raise WireFormatError(f"segments[{i}].type must be 'text' or 'image'")
    if not segments:
        raise WireFormatError("segments must be non-empty")

    # Infer the shot count structurally: every shot carries one answer
    # segment, the query carries none.
    text_count = sum(1 for s in segments if isinstance(s, TextSegment))
    shot_count = max(1, (text_count - 1) // 2)
    try:
        sequence = PromptSequence(segments=tuple(segments), shot_count=shot_count)
        return GenerateRequest(segments=sequence, max_new_tokens=max_new_tokens,
                               seed=seed)
    except (ValueError, InvalidParamsError) as exc:
        raise WireFormatError(str(exc)) from exc


def _expect_str(body: dict[str, Any], key: str) -> str:
    value = body.get(key)
    if not isinstance(value, str) or not value:
        raise WireFormatError(f"{key!r} must be a non-empty string")
    return value


def _expect_int(body: dict[str, Any], key: str) -> int:
    value = body.get(key)
    if not isinstance(value, int) or isinstance(value, bool):
        raise WireFormatError(f"{key!r} must be an integer")
    return value


def _expect_list(body: dict[str, Any], key: str) -> list[Any]:
    value = body.get(key)
    if not isinstance(value, list):
        raise WireFormatError(f"{key!r} must be a list")
    return value
