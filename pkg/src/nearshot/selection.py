"""Dynamic proximity selection of few-shot candidates.

Candidates are scored by fused cosine similarity to the query, filtered by
a threshold, and ordered ascending so the most similar shot sits directly
before the query in the assembled prompt. When the threshold would empty
the pool, the top ``min_keep`` candidates are kept instead, so a prompt
always has at least one shot.
"""

from __future__ import annotations

from dataclasses import dataclass
from typing import Sequence

from sklearn.base import BaseEstimator

from .errors import EmptyPoolError, InvalidParamsError, ZeroShotsError
from .similarity import fused_score
from .types import Candidate, EmbeddedSample, Modality

DEFAULT_THRESHOLD = 0.7


@dataclass(frozen=True)
class SelectionConfig:
    """Threshold, modality, and floor for shot selection."""

    threshold: float = DEFAULT_THRESHOLD
    modality: Modality = Modality.MULTIMODAL
    min_keep: int = 1

    def __post_init__(self) -> None:
        if not -1.0 <= self.threshold <= 1.0:
            raise InvalidParamsError(f"threshold must lie in [-1, 1], got {self.threshold}")
        if self.min_keep < 1:
            raise InvalidParamsError(f"min_keep must be >= 1, got {self.min_keep}")


@dataclass(frozen=True)
class ScoredCandidate:
    """A candidate with its cached similarity score and input position."""

    candidate: Candidate
    embedded: EmbeddedSample | None
    score: float
    original_index: int


@dataclass(frozen=True)
class PromptOrder:
    """Shots in prompt order: ascending score, most similar last.

    ``ranked=False`` marks baseline (random-order) prompts, for which the
    ascending-score invariant does not apply.
    """

    shots: tuple[ScoredCandidate, ...]
    ranked: bool = True
    fallback_applied: bool = False

    def __post_init__(self) -> None:
        if not self.shots:
            raise ZeroShotsError("a prompt order must contain at least one shot")
        if self.ranked:
            scores = [s.score for s in self.shots]
            if any(b < a for a, b in zip(scores, scores[1:])):
                raise ValueError("ranked prompt order must have non-decreasing scores")

    def __len__(self) -> int:
        return len(self.shots)

    def __iter__(self):
        return iter(self.shots)

    @property
    def best(self) -> ScoredCandidate:
        """The shot placed directly before the query."""
        return self.shots[-1]

    @classmethod
    def unranked(cls, shots: Sequence[ScoredCandidate]) -> "PromptOrder":
        return cls(shots=tuple(shots), ranked=False)


def score_pool(
    pool: Sequence[tuple[Candidate, EmbeddedSample]],
    query: EmbeddedSample,
    modality: Modality,
) -> list[ScoredCandidate]:
    """Score every pool candidate against the query once."""
    if not pool:
        raise EmptyPoolError("candidate pool is empty")
    return [
        ScoredCandidate(
            candidate=cand,
            embedded=emb,
            score=fused_score(query, emb, modality),
            original_index=i,
        )
        for i, (cand, emb) in enumerate(pool)
    ]


def select_shots(
    pool: Sequence[tuple[Candidate, EmbeddedSample]],
    query: EmbeddedSample,
    config: SelectionConfig = SelectionConfig(),
) -> PromptOrder:
    """Score, threshold-filter, and order a candidate pool for prompting.

    Retained candidates all score >= ``config.threshold`` (inclusive),
    except when filtering would empty the set, in which case the
    ``min_keep`` highest-scoring candidates are retained. Output is sorted
    ascending by score with ties broken by ascending pool index, so
    identical inputs always yield an identical order.
    """
    scored = score_pool(pool, query, config.modality)
    if config.min_keep > len(scored):
        raise InvalidParamsError(
            f"min_keep={config.min_keep} exceeds pool size {len(scored)}")

    kept = [s for s in scored if s.score >= config.threshold]
    fallback = False
    if not kept:
        by_rank = sorted(scored, key=lambda s: (-s.score, s.original_index))
        kept = by_rank[: config.min_keep]
        fallback = True

    kept.sort(key=lambda s: (s.score, s.original_index))
    return PromptOrder(shots=tuple(kept), fallback_applied=fallback)


def retention_curve(
    pool: Sequence[tuple[Candidate, EmbeddedSample]],
    query: EmbeddedSample,
    thresholds: Sequence[float],
    modality: Modality = Modality.MULTIMODAL,
    min_keep: int = 1,
) -> list[tuple[float, int]]:
    """Kept-candidate counts per threshold, scoring the pool only once.

    Thresholds must be sorted ascending and lie in [-1, 1]. Counts are
    reported after the ``min_keep`` floor, which only engages when a
    threshold retains nothing.
    """
    ths = list(thresholds)
    if not ths:
        raise InvalidParamsError("at least one threshold required")
    if any(b < a for a, b in zip(ths, ths[1:])):
        raise InvalidParamsError("thresholds must be sorted ascending")
    if ths[0] < -1.0 or ths[-1] > 1.0:
        raise InvalidParamsError("thresholds must lie in [-1, 1]")

    scores = sorted(s.score for s in score_pool(pool, query, modality))
    curve: list[tuple[float, int]] = []
    for th in ths:
        raw = sum(1 for s in scores if s >= th)
        curve.append((th, raw if raw >= 1 else min_keep))
    return curve


class ProximitySelector(BaseEstimator):
    """Estimator-style wrapper: fit a candidate pool, select shots per query.

    Mirrors the nearest-neighbour API shape (``fit`` stores the pool,
    ``select`` answers queries) so the selector composes with scikit-learn
    tooling such as ``clone`` and ``get_params``.
    """

    def __init__(self, threshold: float = DEFAULT_THRESHOLD,
                 modality: str = "multimodal", min_keep: int = 1):
        self.threshold = threshold
        self.modality = modality
        self.min_keep = min_keep

    def fit(self, pool: Sequence[tuple[Candidate, EmbeddedSample]], y=None):
        if not pool:
            raise EmptyPoolError("candidate pool is empty")
        self.pool_ = list(pool)
        self.config_ = SelectionConfig(
            threshold=self.threshold,
            modality=Modality.from_string(self.modality),
            min_keep=self.min_keep,
        )
        return self

    def select(self, query: EmbeddedSample) -> PromptOrder:
        self._check_fitted()
        return select_shots(self.pool_, query, self.config_)

    def retention_curve(self, query: EmbeddedSample,
                        thresholds: Sequence[float]) -> list[tuple[float, int]]:
        self._check_fitted()
        return retention_curve(self.pool_, query, thresholds,
                               self.config_.modality, self.config_.min_keep)

    def _check_fitted(self) -> None:
        if not hasattr(self, "pool_"):
            raise InvalidParamsError("selector is not fitted; call fit(pool) first")
