from __future__ import annotations

from fractions import Fraction

import numpy as np
import pytest
from hypothesis import given
from hypothesis import strategies as st
from hypothesis.extra.numpy import arrays

from nearshot.errors import (
    DimensionMismatchError,
    EmptyInputError,
    MissingEmbeddingError,
    ZeroNormVectorError,
)
from nearshot.similarity import cosine, fused_score, mean_pool
from nearshot.types import Modality

from .conftest import emb, sample


def test_cosine_identical_vectors():
    assert cosine(emb(1, 0), emb(1, 0)) == 1.0


def test_cosine_orthogonal_vectors():
    assert cosine(emb(1, 0), emb(0, 1)) == 0.0


def test_cosine_against_exact_rational_oracle():
    # Oracle: dot/(|a||b|) in exact arithmetic for a=[1,2,2], b=[2,1,2]:
    # dot = 8, |a| = |b| = 3, so the exact value is 8/9.
    expected = Fraction(8, 9)
    assert abs(cosine(emb(1, 2, 2), emb(2, 1, 2)) - float(expected)) < 1e-12


def test_cosine_dimension_mismatch():
    with pytest.raises(DimensionMismatchError):
        cosine(emb(1, 0), emb(1, 0, 0))


def test_cosine_zero_norm_is_an_error_not_zero():
    with pytest.raises(ZeroNormVectorError):
        cosine(emb(0, 0), emb(1, 0))


_vectors = arrays(np.float64, st.integers(2, 8),
                  elements=st.floats(-100, 100, allow_nan=False)).filter(
    lambda a: float(np.linalg.norm(a)) > 1e-6)


@given(_vectors)
def test_cosine_self_similarity_is_one(values):
    assert cosine(emb(*values), emb(*values)) == pytest.approx(1.0, abs=1e-12)


@given(_vectors, _vectors)
def test_cosine_is_order_symmetric_exactly(a, b):
    dim = min(len(a), len(b))
    a, b = a[:dim], b[:dim]
    if np.linalg.norm(a) < 1e-6 or np.linalg.norm(b) < 1e-6:
        return
    assert cosine(emb(*a), emb(*b)) == cosine(emb(*b), emb(*a))


@given(_vectors, st.floats(0.01, 1000, allow_nan=False))
def test_cosine_scale_invariance(values, k):
    base = cosine(emb(*values), emb(*(v + 1e-3 for v in values)))
    scaled = cosine(emb(*(k * v for v in values)), emb(*(v + 1e-3 for v in values)))
    assert scaled == pytest.approx(base, abs=1e-12)


def test_mean_pool_singleton_is_identity():
    v = emb(3, 4)
    assert np.array_equal(mean_pool([v]).values, v.values)


def test_mean_pool_arithmetic_mean():
    pooled = mean_pool([emb(1, 1), emb(3, 3)])
    assert pooled.tolist() == [2.0, 2.0]


def test_mean_pool_against_column_sum_oracle():
    # Oracle: sum each column and divide by the count.
    vectors = [[1, 0], [0, 1], [2, 2]]
    expected = [sum(col) / 3 for col in zip(*vectors)]
    pooled = mean_pool([emb(*v) for v in vectors])
    assert pooled.tolist() == expected == [1.0, 1.0]


def test_mean_pool_rejects_empty_and_mismatched():
    with pytest.raises(EmptyInputError):
        mean_pool([])
    with pytest.raises(DimensionMismatchError):
        mean_pool([emb(1, 0), emb(1, 0, 0)])


def test_fused_multimodal_is_arithmetic_mean():
    # Image cosine vs [1,0] of [4,3] is exactly 0.8; text [3,4] exactly 0.6.
    q = sample(image=emb(1, 0), text=emb(1, 0))
    c = sample(image=emb(4, 3), text=emb(3, 4))
    assert fused_score(q, c, Modality.IMAGE) == 0.8
    assert fused_score(q, c, Modality.TEXT) == 0.6
    assert fused_score(q, c, Modality.MULTIMODAL) == pytest.approx(0.7, abs=1e-12)


def test_fused_single_modality_passthrough_is_exact():
    q = sample(image=emb(1, 0), text=emb(1, 0))
    c = sample(image=emb(4, 3), text=emb(3, 4))
    assert fused_score(q, c, Modality.IMAGE) == cosine(emb(1, 0), emb(4, 3))
    assert fused_score(q, c, Modality.TEXT) == cosine(emb(1, 0), emb(3, 4))


def test_fused_self_similarity():
    s = sample(image=emb(2, 1), text=emb(0.5, 3))
    assert fused_score(s, s, Modality.MULTIMODAL) == pytest.approx(1.0, abs=1e-12)


def test_fused_missing_channel_raises():
    q = sample(text=emb(1, 0))
    c = sample(text=emb(3, 4))
    with pytest.raises(MissingEmbeddingError):
        fused_score(q, c, Modality.IMAGE)
    with pytest.raises(MissingEmbeddingError):
        fused_score(q, c, Modality.MULTIMODAL)


@given(_vectors, _vectors, _vectors, _vectors)
def test_fused_multimodal_lies_between_channel_scores(a, b, c, d):
    dim = min(len(a), len(b), len(c), len(d))
    a, b, c, d = (v[:dim] for v in (a, b, c, d))
    if any(np.linalg.norm(v) < 1e-6 for v in (a, b, c, d)):
        return
    q = sample(image=emb(*a), text=emb(*b))
    cand = sample(image=emb(*c), text=emb(*d))
    image_score = fused_score(q, cand, Modality.IMAGE)
    text_score = fused_score(q, cand, Modality.TEXT)
    fused = fused_score(q, cand, Modality.MULTIMODAL)
    low, high = sorted((image_score, text_score))
    assert low - 1e-12 <= fused <= high + 1e-12
