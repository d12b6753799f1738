"""Deterministic mock backends.

Every capability is a pure function of its inputs and the configured seed,
so pipeline runs are reproducible byte-for-byte.

Embeddings hash content *features* (text tokens, quantized image blocks)
to fixed random directions drawn from a counter-based PRNG, then pool and
L2-normalize. Unlike hashing a whole byte blob, feature-level hashing
preserves a similarity structure: inputs sharing tokens or blocks land
near each other, which is what gives the synthetic fixtures retrieval
signal while remaining deterministic and content-sensitive.

The mock generator echoes the answer of the shot directly before the
query, which turns end-to-end mock accuracy into a direct readout of
selection quality.
"""

from __future__ import annotations

import hashlib
import re
import zlib
from dataclasses import dataclass

import numpy as np
from PIL import Image, UnidentifiedImageError

from ..errors import BackendError, ImageDecodeFailureError
from ..grounding import Detection
from ..prompt import PromptSequence
from ..similarity import mean_pool
from ..types import CONDITIONS, Embedding
from .base import BackendSet, GenerateRequest, MockConfig

# Coarse grid the mock image embedder reduces every image to, and the
# quantization step for block intensity levels.
EMBED_GRID = 16
LEVEL_STEP = 32

# Deviation (from the median intensity) thresholds for the mock detector.
STRONG_DEVIATION = 32
_TOKEN_RE = re.compile(r"[^\s,]+")


def condition_intensity(condition_text: str) -> int:
    """The pixel intensity conventionally associated with a condition.

    The mock detector ranks image regions by how closely their mean
    intensity matches the queried condition's value; synthetic images
    paint regions with the same convention so grounding has signal.
    Unknown phrases map onto the same range by hash.
    """
    if condition_text in CONDITIONS:
        idx = CONDITIONS.index(condition_text)
    else:
        idx = zlib.crc32(condition_text.encode("utf-8")) % len(CONDITIONS)
    return 16 + idx * 8


def _feature_vector(feature: str, seed: int, dim: int) -> np.ndarray:
    """A fixed pseudo-random direction for one content feature."""
    digest = hashlib.sha256(f"{seed}\x1f{feature}".encode("utf-8")).digest()
    key = np.frombuffer(digest[:16], dtype=np.uint64)
    gen = np.random.Generator(np.random.Philox(key=key))
    return gen.standard_normal(dim)


def _pooled_embedding(features: list[str], seed: int, dim: int) -> Embedding:
    vectors = [Embedding(_feature_vector(f, seed, dim)) for f in features]
    pooled = mean_pool(vectors).values
    norm = float(np.linalg.norm(pooled))
    if norm == 0.0:
        raise BackendError("degenerate mock embedding (zero norm)")
    return Embedding(pooled / norm)


@dataclass(frozen=True)
class MockTextEmbedder:
    config: MockConfig

    def embed_text(self, text: str) -> Embedding:
        if not text:
            raise BackendError("cannot embed empty text")
        tokens = _TOKEN_RE.findall(text) or [text]
        return _pooled_embedding(tokens, self.config.seed, self.config.embedding_dim)


def _load_gray(image_ref: str) -> np.ndarray:
    try:
        with Image.open(image_ref) as img:
            return np.asarray(img.convert("L"), dtype=np.float64)
    except FileNotFoundError as exc:
        raise ImageDecodeFailureError(f"image not found: {image_ref}") from exc
    except UnidentifiedImageError as exc:
        raise ImageDecodeFailureError(f"cannot decode image: {image_ref}") from exc


@dataclass(frozen=True)
class MockImageEmbedder:
    config: MockConfig

    def embed_image(self, image_ref: str) -> Embedding:
        try:
            with Image.open(image_ref) as img:
                small = np.asarray(
                    img.convert("L").resize((EMBED_GRID, EMBED_GRID), Image.BILINEAR),
                    dtype=np.int64)
        except FileNotFoundError as exc:
            raise ImageDecodeFailureError(f"image not found: {image_ref}") from exc
        except UnidentifiedImageError as exc:
            raise ImageDecodeFailureError(f"cannot decode image: {image_ref}") from exc
        levels = small // LEVEL_STEP
        blocks = [f"px{i}:{level}" for i, level in enumerate(levels.ravel().tolist())]
        return _pooled_embedding(blocks, self.config.seed, self.config.embedding_dim)


@dataclass(frozen=True)
class MockDetector:
    """Scores contrast regions by intensity match to the queried condition."""

    config: MockConfig

    def detect(self, image_ref: str, condition_text: str) -> list[Detection]:
        if not condition_text:
            raise BackendError("condition text must be non-empty")
        pixels = _load_gray(image_ref)
        height, width = pixels.shape
        median = float(np.median(pixels))
        target = condition_intensity(condition_text)

        detections: list[Detection] = []
        mask = np.abs(pixels - median) > STRONG_DEVIATION
        if mask.any():
            from scipy import ndimage

            labelled, count = ndimage.label(mask)
            components = sorted(
                range(1, count + 1),
                key=lambda c: int((labelled == c).sum()),
                reverse=True,
            )[:2]
            for comp in components:
                ys, xs = np.nonzero(labelled == comp)
                box = (int(xs.min()), int(ys.min()), int(xs.max()) + 1, int(ys.max()) + 1)
                mean_intensity = float(pixels[ys, xs].mean())
                score = max(0.05, 1.0 - abs(mean_intensity - target) / 255.0)
                detections.append(Detection(box=box, score=round(score, 4)))

        # A low-scoring seeded proposal is always present, so prompts never
        # lose their image entirely on featureless inputs.
        digest = hashlib.sha256(
            f"{self.config.seed}\x1f{condition_text}".encode("utf-8")
            + hashlib.sha256(pixels.tobytes()).digest()
        ).digest()
        key = np.frombuffer(digest[:16], dtype=np.uint64)
        gen = np.random.Generator(np.random.Philox(key=key))
        bw = max(2, width // 4)
        bh = max(2, height // 4)
        x0 = int(gen.integers(0, max(1, width - bw)))
        y0 = int(gen.integers(0, max(1, height - bh)))
        jitter_score = round(float(gen.uniform(0.01, 0.04)), 4)
        jitter = Detection(box=(x0, y0, x0 + bw, y0 + bh), score=jitter_score)
        if all(jitter.box != d.box for d in detections):
            detections.append(jitter)
        return detections


@dataclass(frozen=True)
class MockGenerator:
    """Echoes the answer of the shot adjacent to the query."""

    config: MockConfig

    def generate(self, request: GenerateRequest) -> str:
        texts = request.segments.texts
        if len(texts) < 2:
            raise BackendError("prompt has no shot answer to echo")
        return texts[-2]


def make_mock_backends(config: MockConfig = MockConfig()) -> BackendSet:
    return BackendSet(
        text_embedder=MockTextEmbedder(config),
        image_embedder=MockImageEmbedder(config),
        detector=MockDetector(config),
        generator=MockGenerator(config),
    )


def prompt_fingerprint(segments: PromptSequence) -> str:
    """Stable content hash of a prompt, used by tests and tracing."""
    h = hashlib.sha256()
    for segment in segments.segments:
        h.update(repr(segment).encode("utf-8"))
    return h.hexdigest()
