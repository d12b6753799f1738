from __future__ import annotations

import numpy as np
import pytest
from sklearn.base import clone

from nearshot.errors import EmptyPoolError, InvalidParamsError
from nearshot.selection import (
    PromptOrder,
    ProximitySelector,
    ScoredCandidate,
    SelectionConfig,
    retention_curve,
    select_shots,
)
from nearshot.types import Candidate, Embedding, Modality

from .conftest import emb, make_record, sample, text_pool

# Integer vectors give exact cosines against the query [1, 0]:
# [24, 7] -> 0.96, [3, 4] -> 0.6, [7, 24] -> 0.28, [4, 3] -> 0.8.
QUERY = sample(text=emb(1, 0))
TEXT_CFG = lambda th, min_keep=1: SelectionConfig(  # noqa: E731
    threshold=th, modality=Modality.TEXT, min_keep=min_keep)


def test_filter_and_ascending_order_with_argmax_last():
    pool = text_pool([(24, 7), (3, 4), (7, 24)])  # scores 0.96, 0.6, 0.28
    order = select_shots(pool, QUERY, TEXT_CFG(0.6))
    assert [s.original_index for s in order] == [1, 0]
    assert [s.score for s in order] == [0.6, 0.96]
    assert order.best.original_index == 0
    assert not order.fallback_applied


def test_threshold_comparison_is_inclusive():
    pool = text_pool([(3, 4)])  # exactly 0.6
    order = select_shots(pool, QUERY, TEXT_CFG(0.6))
    assert len(order) == 1 and order.shots[0].score == 0.6


def test_min_keep_fallback_when_threshold_empties_pool():
    pool = text_pool([(2, 5), (1, 5)])  # both well below 0.7
    order = select_shots(pool, QUERY, TEXT_CFG(0.7))
    assert order.fallback_applied
    assert len(order) == 1
    assert order.best.original_index == 0  # the higher-scoring candidate


def test_min_keep_two_keeps_top_two_in_ascending_order():
    pool = text_pool([(1, 5), (2, 5), (0, 5)])
    order = select_shots(pool, QUERY, TEXT_CFG(0.99, min_keep=2))
    assert order.fallback_applied
    assert [s.original_index for s in order] == [0, 1]


def test_tie_break_by_ascending_pool_index():
    pool = text_pool([(3, 4), (6, 8), (24, 7)])  # 0.6, 0.6, 0.96
    order = select_shots(pool, QUERY, TEXT_CFG(0.0))
    assert [s.original_index for s in order] == [0, 1, 2]


def test_empty_pool_is_an_error():
    with pytest.raises(EmptyPoolError):
        select_shots([], QUERY, TEXT_CFG(0.5))


def test_min_keep_larger_than_pool_is_invalid():
    pool = text_pool([(1, 0)])
    with pytest.raises(InvalidParamsError):
        select_shots(pool, QUERY, TEXT_CFG(0.5, min_keep=2))


def test_threshold_outside_range_is_invalid():
    with pytest.raises(InvalidParamsError):
        SelectionConfig(threshold=1.0 + 1e-9)
    with pytest.raises(InvalidParamsError):
        SelectionConfig(threshold=-1.1)


def test_permutation_changes_only_tie_breaks():
    vectors = [(24, 7), (3, 4), (7, 24), (4, 3)]
    pool = text_pool(vectors)
    permuted = text_pool([vectors[i] for i in (2, 0, 3, 1)])
    scores_a = [s.score for s in select_shots(pool, QUERY, TEXT_CFG(0.0))]
    scores_b = [s.score for s in select_shots(permuted, QUERY, TEXT_CFG(0.0))]
    assert scores_a == scores_b


def test_determinism_bytewise():
    rng = np.random.default_rng(42)
    pool = [
        (Candidate(make_record(record_id=f"c{i}:Edema", label_name="Edema")),
         sample(image=emb(*rng.normal(size=6)), text=emb(*rng.normal(size=6))))
        for i in range(8)
    ]
    query = sample(image=emb(*rng.normal(size=6)), text=emb(*rng.normal(size=6)))
    first = select_shots(pool, query)
    second = select_shots(pool, query)
    assert [(s.score, s.original_index) for s in first] == \
           [(s.score, s.original_index) for s in second]


def brute_force_order(pool, query, threshold, modality, min_keep=1):
    """Independent score/filter/sort oracle over raw numpy vectors."""
    def cos(u: Embedding, v: Embedding) -> float:
        raw = float(np.dot(u.values, v.values)) / (
            float(np.linalg.norm(u.values)) * float(np.linalg.norm(v.values)))
        return min(1.0, max(-1.0, raw))

    scored = []
    for i, (_cand, embedded) in enumerate(pool):
        if modality is Modality.TEXT:
            s = cos(query.text_emb, embedded.text_emb)
        elif modality is Modality.IMAGE:
            s = cos(query.image_emb, embedded.image_emb)
        else:
            s = (cos(query.image_emb, embedded.image_emb)
                 + cos(query.text_emb, embedded.text_emb)) / 2.0
        scored.append((s, i))
    kept = [t for t in scored if t[0] >= threshold]
    if not kept:
        kept = sorted(scored, key=lambda t: (-t[0], t[1]))[:min_keep]
    return sorted(kept, key=lambda t: (t[0], t[1]))


@pytest.mark.parametrize("pool_seed", range(12))
def test_matches_brute_force_oracle(pool_seed):
    rng = np.random.default_rng(pool_seed)
    size = int(rng.integers(1, 9))
    dim = int(rng.integers(2, 17))
    pool = [
        (Candidate(make_record(record_id=f"c{i}:Edema", label_name="Edema")),
         sample(image=emb(*rng.normal(size=dim)), text=emb(*rng.normal(size=dim))))
        for i in range(size)
    ]
    query = sample(image=emb(*rng.normal(size=dim)), text=emb(*rng.normal(size=dim)))
    threshold = float(rng.uniform(-1, 1))
    order = select_shots(pool, query, SelectionConfig(threshold=threshold))
    expected = brute_force_order(pool, query, threshold, Modality.MULTIMODAL)
    assert [(s.score, s.original_index) for s in order] == expected


def test_retention_curve_against_filter_oracle():
    pool = text_pool([(24, 7), (4, 3), (3, 4)])  # 0.96, 0.8, 0.6
    curve = retention_curve(pool, QUERY, [0.7, 0.9], modality=Modality.TEXT)
    assert curve == [(0.7, 2), (0.9, 1)]


def test_retention_curve_keeps_everything_at_minus_one():
    pool = text_pool([(24, 7), (3, 4), (7, 24), (-5, 1)])
    curve = retention_curve(pool, QUERY, [-1.0], modality=Modality.TEXT)
    assert curve == [(-1.0, 4)]


def test_retention_curve_floors_at_min_keep():
    pool = text_pool([(3, 4), (7, 24)])
    curve = retention_curve(pool, QUERY, [0.99, 1.0], modality=Modality.TEXT)
    assert curve == [(0.99, 1), (1.0, 1)]


def test_retention_curve_validates_thresholds():
    pool = text_pool([(1, 0)])
    with pytest.raises(InvalidParamsError):
        retention_curve(pool, QUERY, [0.5, 0.2], modality=Modality.TEXT)
    with pytest.raises(InvalidParamsError):
        retention_curve(pool, QUERY, [1.0 + 1e-9], modality=Modality.TEXT)
    with pytest.raises(InvalidParamsError):
        retention_curve(pool, QUERY, [], modality=Modality.TEXT)


def test_prompt_order_validates_ranked_monotonicity():
    record = make_record()
    shots = (
        ScoredCandidate(Candidate(record), None, 0.9, 0),
        ScoredCandidate(Candidate(record), None, 0.5, 1),
    )
    with pytest.raises(ValueError):
        PromptOrder(shots=shots)
    assert len(PromptOrder.unranked(shots)) == 2


def test_proximity_selector_estimator_api():
    pool = text_pool([(24, 7), (3, 4), (7, 24)])
    selector = ProximitySelector(threshold=0.6, modality="text")
    assert selector.get_params() == {"threshold": 0.6, "modality": "text", "min_keep": 1}
    cloned = clone(selector)
    order = cloned.fit(pool).select(QUERY)
    direct = select_shots(pool, QUERY, TEXT_CFG(0.6))
    assert [(s.score, s.original_index) for s in order] == \
           [(s.score, s.original_index) for s in direct]
    assert cloned.retention_curve(QUERY, [0.6, 0.9]) == [(0.6, 2), (0.9, 1)]


def test_proximity_selector_requires_fit():
    with pytest.raises(InvalidParamsError):
        ProximitySelector().select(QUERY)
