"""Wire-protocol conformance suite.

The same checks validate any server claiming the protocol: the built-in
mock server and external adapters alike. Run programmatically via
``run_conformance`` or from the command line:

    python -m nearshot.conformance http://127.0.0.1:8008
"""

from __future__ import annotations

import json
import sys
import tempfile
from dataclasses import dataclass
from pathlib import Path
from typing import Any, Callable

import numpy as np
import requests
from PIL import Image


@dataclass
class CheckResult:
    name: str
    passed: bool
    detail: str = ""


def _test_image(tmp_dir: Path) -> Path:
    rng = np.random.default_rng(1234)
    pixels = np.full((64, 64), 140, dtype=np.uint8)
    pixels[20:44, 12:36] = 40
    pixels += rng.integers(0, 4, size=pixels.shape).astype(np.uint8)
    path = tmp_dir / "conformance_probe.png"
    Image.fromarray(pixels, mode="L").save(path, format="PNG")
    return path


def run_conformance(base_url: str, timeout: float = 30.0) -> list[CheckResult]:
    """Run every protocol check against a live server; never raises."""
    base_url = base_url.rstrip("/")
    session = requests.Session()
    tmp_dir = Path(tempfile.mkdtemp(prefix="nearshot_conf_"))
    image_path = _test_image(tmp_dir)

    from .backends import wire

    def post(path: str, body: dict[str, Any]) -> requests.Response:
        return session.post(base_url + path, json=body, timeout=timeout)

    results: list[CheckResult] = []

    def check(name: str, fn: Callable[[], str | None]) -> None:
        try:
            detail = fn() or ""
            results.append(CheckResult(name, True, detail))
        except AssertionError as exc:
            results.append(CheckResult(name, False, str(exc)))
        except Exception as exc:  # unreachable server, bad JSON, etc.
            results.append(CheckResult(name, False, f"{type(exc).__name__}: {exc}"))

    def expect_embedding(body: dict[str, Any]) -> int:
        assert isinstance(body, dict), f"response must be a JSON object, got {type(body)}"
        assert isinstance(body.get("vector"), list), "'vector' must be a list"
        dim = body.get("dim")
        assert isinstance(dim, int) and not isinstance(dim, bool), "'dim' must be an int"
        assert len(body["vector"]) == dim, (
            f"vector length {len(body['vector'])} != dim {dim}")
        for v in body["vector"]:
            assert isinstance(v, (int, float)) and not isinstance(v, bool), (
                "vector entries must be numbers")
            assert np.isfinite(v), "vector entries must be finite"
        return dim

    def expect_error(response: requests.Response) -> None:
        assert response.status_code // 100 != 2, (
            f"expected a non-2xx status, got {response.status_code}")
        body = response.json()
        assert isinstance(body, dict) and isinstance(body.get("error"), str) \
            and body["error"], "error responses must carry {'error': str}"

    def check_healthz() -> str:
        response = session.get(base_url + wire.HEALTH_PATH, timeout=timeout)
        assert response.status_code == 200, f"healthz returned {response.status_code}"
        body = response.json()
        assert isinstance(body.get("capabilities"), dict), (
            "healthz must report a 'capabilities' object")
        return json.dumps(body.get("capabilities"), sort_keys=True)

    check("healthz reports capabilities", check_healthz)

    dims: list[int] = []

    def check_embed_text() -> str:
        response = post(wire.EMBED_TEXT_PATH, {"text": "0.52 sec QTc"})
        assert response.status_code == 200, f"status {response.status_code}: {response.text[:120]}"
        dims.append(expect_embedding(response.json()))
        return f"dim={dims[-1]}"

    def check_embed_text_dim_consistency() -> str:
        first = post(wire.EMBED_TEXT_PATH, {"text": "alpha"}).json()
        second = post(wire.EMBED_TEXT_PATH, {"text": "a completely different sentence"}).json()
        d1, d2 = expect_embedding(first), expect_embedding(second)
        assert d1 == d2, f"text embedding dim varies across calls: {d1} vs {d2}"
        return f"dim={d1}"

    def check_embed_text_error_shape() -> None:
        expect_error(post(wire.EMBED_TEXT_PATH, {}))

    def check_embed_image_b64() -> str:
        payload = wire.encode_image_payload(str(image_path), "b64")
        response = post(wire.EMBED_IMAGE_PATH, payload)
        assert response.status_code == 200, f"status {response.status_code}: {response.text[:120]}"
        dim = expect_embedding(response.json())
        if dims:
            assert dim == dims[0], f"image dim {dim} != text dim {dims[0]}"
        return f"dim={dim}"

    def check_embed_image_error_shape() -> None:
        expect_error(post(wire.EMBED_IMAGE_PATH, {"image_b64": "!!!not base64!!!"}))

    def check_detect() -> str:
        payload = wire.encode_image_payload(str(image_path), "b64")
        payload["query"] = "Pneumonia"
        response = post(wire.DETECT_PATH, payload)
        assert response.status_code == 200, f"status {response.status_code}: {response.text[:120]}"
        body = response.json()
        detections = body.get("detections")
        assert isinstance(detections, list), "'detections' must be a list"
        for i, det in enumerate(detections):
            box = det.get("box")
            assert isinstance(box, list) and len(box) == 4, f"detections[{i}].box must be 4 coords"
            assert all(isinstance(c, int) and not isinstance(c, bool) for c in box), (
                f"detections[{i}].box coords must be integers")
            assert box[0] < box[2] and box[1] < box[3], f"detections[{i}].box is degenerate"
            score = det.get("score")
            assert isinstance(score, (int, float)) and 0.0 <= score <= 1.0, (
                f"detections[{i}].score must lie in [0, 1]")
        return f"{len(detections)} detection(s)"

    def check_detect_error_shape() -> None:
        expect_error(post(wire.DETECT_PATH, {"query": "Pneumonia"}))

    def check_generate() -> str:
        payload = {
            "segments": [
                {"type": "image", **wire.encode_image_payload(str(image_path), "b64")},
                {"type": "text", "text": "Question: Is the patient likely to have Pneumonia?"},
                {"type": "text", "text": "yes"},
                {"type": "image", **wire.encode_image_payload(str(image_path), "b64")},
                {"type": "text", "text": "Question: Is the patient likely to have Pneumonia?"},
            ],
            "max_new_tokens": 20,
            "seed": 7,
        }
        response = post(wire.GENERATE_PATH, payload)
        assert response.status_code == 200, f"status {response.status_code}: {response.text[:120]}"
        body = response.json()
        assert isinstance(body.get("text"), str), "'text' must be a string"
        return f"text={body['text']!r}"

    def check_generate_error_shape() -> None:
        expect_error(post(wire.GENERATE_PATH, {"segments": [], "max_new_tokens": 20}))

    def check_unknown_route() -> None:
        expect_error(post("/v1/nope", {}))

    check("embed_text schema", check_embed_text)
    check("embed_text dim consistency", check_embed_text_dim_consistency)
    check("embed_text error shape", check_embed_text_error_shape)
    check("embed_image b64 schema", check_embed_image_b64)
    check("embed_image error shape", check_embed_image_error_shape)
    check("detect schema", check_detect)
    check("detect error shape", check_detect_error_shape)
    check("generate schema", check_generate)
    check("generate error shape", check_generate_error_shape)
    check("unknown route error shape", check_unknown_route)
    return results


def main(argv: list[str] | None = None) -> int:
    args = argv if argv is not None else sys.argv[1:]
    if len(args) != 1:
        print("usage: python -m nearshot.conformance <base-url>", file=sys.stderr)
        return 1
    results = run_conformance(args[0])
    failed = 0
    for result in results:
        status = "PASS" if result.passed else "FAIL"
        detail = f"  ({result.detail})" if result.detail else ""
        print(f"{status}  {result.name}{detail}")
        failed += 0 if result.passed else 1
    print(f"{len(results) - failed}/{len(results)} conformance checks passed")
    return 0 if failed == 0 else 1


if __name__ == "__main__":
    sys.exit(main())
