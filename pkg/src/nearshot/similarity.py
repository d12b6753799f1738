"""Vector similarity used by shot selection.

Cosine is the only metric in v1; the ``Metric`` enum reserves room for
alternatives without changing call sites.
"""

from __future__ import annotations

from enum import Enum

import numpy as np

from .errors import (
    DimensionMismatchError,
    EmptyInputError,
    MissingEmbeddingError,
    ZeroNormVectorError,
)
from .types import EmbeddedSample, Embedding, Modality


class Metric(Enum):
    COSINE = "cosine"


def cosine(a: Embedding, b: Embedding) -> float:
    """Cosine similarity of two embeddings, in [-1, 1].

    Zero-norm vectors are an error rather than similarity 0: a zero
    embedding indicates a backend failure, and silently scoring it would
    corrupt the selection ordering.
    """
    if a.dim != b.dim:
        raise DimensionMismatchError(f"dimension mismatch: {a.dim} vs {b.dim}")
    av, bv = a.values, b.values
    na = float(np.linalg.norm(av))
    nb = float(np.linalg.norm(bv))
    if na == 0.0 or nb == 0.0:
        raise ZeroNormVectorError("cosine undefined for a zero-norm embedding")
    score = float(np.dot(av, bv)) / (na * nb)
    # Floating-point rounding can push |score| infinitesimally past 1.
    return min(1.0, max(-1.0, score))


def mean_pool(tokens: list[Embedding]) -> Embedding:
    """Elementwise arithmetic mean of token-level embeddings."""
    if not tokens:
        raise EmptyInputError("mean_pool needs at least one token embedding")
    dim = tokens[0].dim
    for t in tokens[1:]:
        if t.dim != dim:
            raise DimensionMismatchError(f"dimension mismatch: {dim} vs {t.dim}")
    stacked = np.stack([t.values for t in tokens])
    return Embedding(stacked.mean(axis=0))


def fused_score(q: EmbeddedSample, c: EmbeddedSample, modality: Modality) -> float:
    """Similarity between a query and a candidate under the given modality.

    Multimodal is the arithmetic mean of the image-channel and text-channel
    cosines; single-modality modes pass their channel's cosine through.
    """
    if modality is Modality.IMAGE:
        return cosine(*_channel(q, c, "image_emb"))
    if modality is Modality.TEXT:
        return cosine(*_channel(q, c, "text_emb"))
    img = cosine(*_channel(q, c, "image_emb"))
    txt = cosine(*_channel(q, c, "text_emb"))
    return (img + txt) / 2.0


def _channel(q: EmbeddedSample, c: EmbeddedSample, attr: str) -> tuple[Embedding, Embedding]:
    qe = getattr(q, attr)
    ce = getattr(c, attr)
    if qe is None or ce is None:
        raise MissingEmbeddingError(f"{attr} required by the selected modality is absent")
    return qe, ce
