"""Feature engineering: correlation ranking and text serialization.

Feature selection ranks lab features by the absolute Pearson correlation
with a binary label and keeps the strongest ones (at most ``k`` per label).
Missing cells are handled by pairwise deletion, never imputation: the
pipeline's whole premise is that records are incomplete.
"""

from __future__ import annotations

import logging
import math
from dataclasses import dataclass
from typing import NamedTuple, Sequence

import numpy as np
import pandas as pd
from sklearn.base import BaseEstimator, TransformerMixin

from ..errors import InsufficientDataError, InvalidParamsError
from ..serialization import format_value, serialize_features

__all__ = [
    "DEFAULT_FEATURES_PER_LABEL",
    "FeatureScore",
    "PearsonFeatureSelector",
    "PearsonResult",
    "format_value",
    "pearson",
    "rank_features",
    "select_features",
    "serialize_features",
]

logger = logging.getLogger(__name__)

DEFAULT_FEATURES_PER_LABEL = 10


class PearsonResult(NamedTuple):
    """Correlation coefficient plus the diagnostics callers need."""

    r: float
    n: int
    constant: bool


def pearson(x: Sequence[float] | np.ndarray, y: Sequence[float] | np.ndarray) -> PearsonResult:
    """Pearson r with pairwise deletion of missing (NaN) entries.

    A zero-variance side yields r=0 with the ``constant`` flag set instead
    of an error, so rankers can skip such columns explicitly.
    """
    xa = np.asarray(x, dtype=np.float64)
    ya = np.asarray(y, dtype=np.float64)
    if xa.shape != ya.shape:
        raise InvalidParamsError(f"length mismatch: {xa.shape} vs {ya.shape}")
    mask = ~(np.isnan(xa) | np.isnan(ya))
    xa, ya = xa[mask], ya[mask]
    n = int(xa.size)
    if n < 2:
        raise InsufficientDataError(f"need >= 2 complete pairs, got {n}")
    xc = xa - xa.mean()
    yc = ya - ya.mean()
    denom = math.sqrt(float(np.dot(xc, xc)) * float(np.dot(yc, yc)))
    if denom == 0.0:
        return PearsonResult(r=0.0, n=n, constant=True)
    r = float(np.dot(xc, yc)) / denom
    return PearsonResult(r=min(1.0, max(-1.0, r)), n=n, constant=False)


@dataclass(frozen=True)
class FeatureScore:
    name: str
    r: float
    n: int


def rank_features(frame: pd.DataFrame, labels: Sequence[int] | np.ndarray | pd.Series,
                  ranking: str = "abs") -> list[FeatureScore]:
    """All usable features ranked strongest-correlation-first.

    Constant columns and columns with fewer than two complete pairs are
    excluded (logged). Ties break by feature name so ranking is
    deterministic.
    """
    if ranking not in ("abs", "signed"):
        raise InvalidParamsError(f"ranking must be 'abs' or 'signed', got {ranking!r}")
    y = np.asarray(labels, dtype=np.float64)
    if y.shape[0] != frame.shape[0]:
        raise InvalidParamsError(
            f"label vector length {y.shape[0]} != matrix rows {frame.shape[0]}")
    values = set(np.unique(y[~np.isnan(y)]).tolist())
    if not values <= {0.0, 1.0}:
        raise InvalidParamsError(f"label column must be binary, got values {sorted(values)}")

    scores: list[FeatureScore] = []
    for name in frame.columns:
        try:
            result = pearson(frame[name].to_numpy(dtype=np.float64), y)
        except InsufficientDataError:
            logger.warning("feature %r skipped: fewer than 2 complete pairs", name)
            continue
        if result.constant:
            logger.warning("feature %r skipped: constant column", name)
            continue
        scores.append(FeatureScore(name=name, r=result.r, n=result.n))

    key = (lambda s: (-abs(s.r), s.name)) if ranking == "abs" else (lambda s: (-s.r, s.name))
    scores.sort(key=key)
    return scores


def select_features(frame: pd.DataFrame, labels: Sequence[int] | np.ndarray | pd.Series,
                    k: int = DEFAULT_FEATURES_PER_LABEL, ranking: str = "abs") -> list[str]:
    """The top-``k`` feature names most correlated with the label."""
    if k < 1:
        raise InvalidParamsError(f"k must be >= 1, got {k}")
    return [s.name for s in rank_features(frame, labels, ranking)[:k]]


class PearsonFeatureSelector(BaseEstimator, TransformerMixin):
    """scikit-learn style transformer keeping the top correlated columns.

    Operates on DataFrames so missing cells survive into pairwise-deleted
    correlations. After ``fit``, ``selected_features_`` holds the ordered
    names and ``scores_`` the full ranking.
    """

    def __init__(self, k: int = DEFAULT_FEATURES_PER_LABEL, ranking: str = "abs"):
        self.k = k
        self.ranking = ranking

    def fit(self, X: pd.DataFrame, y: Sequence[int] | np.ndarray | pd.Series):
        ranked = rank_features(X, y, ranking=self.ranking)
        if self.k < 1:
            raise InvalidParamsError(f"k must be >= 1, got {self.k}")
        self.scores_ = ranked
        self.selected_features_ = [s.name for s in ranked[: self.k]]
        return self

    def transform(self, X: pd.DataFrame) -> pd.DataFrame:
        if not hasattr(self, "selected_features_"):
            raise InvalidParamsError("selector is not fitted; call fit(X, y) first")
        return X[self.selected_features_]
