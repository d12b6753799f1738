"""Core domain types shared across the pipeline.

All types here are immutable after construction and hold no model logic.
Image references are opaque locators (paths/URIs); nothing in this module
ever decodes pixels.
"""

from __future__ import annotations

import math
from dataclasses import dataclass
from enum import Enum
from typing import Any, Iterator

import numpy as np

from .errors import UnknownLabelError

# The fixed vocabulary of chest pathologies a record can be labelled with.
CONDITIONS: tuple[str, ...] = (
    "Atelectasis",
    "Cardiomegaly",
    "Consolidation",
    "Edema",
    "Enlarged Cardiomediastinum",
    "Fracture",
    "Lung Lesion",
    "Lung Opacity",
    "Pleural Effusion",
    "Pleural Other",
    "Pneumonia",
    "Pneumothorax",
)


class Modality(Enum):
    """Which similarity channel(s) drive shot selection."""

    TEXT = "text"
    IMAGE = "image"
    MULTIMODAL = "multimodal"

    @classmethod
    def from_string(cls, value: str) -> "Modality":
        try:
            return cls(value.lower())
        except ValueError:
            raise ValueError(f"unknown modality {value!r}; expected one of "
                             f"{[m.value for m in cls]}") from None


class Outcome(Enum):
    """Binary diagnostic call extracted from a generation."""

    POSITIVE = "positive"
    NEGATIVE = "negative"
    UNPARSEABLE = "unparseable"


@dataclass(frozen=True)
class Prediction:
    """A parsed model answer plus the raw generation it came from."""

    outcome: Outcome
    raw_text: str


@dataclass(frozen=True)
class LabFeature:
    """One laboratory measurement; normal-range bounds are often absent."""

    label: str
    value: float
    unit: str = ""
    low: float | None = None
    high: float | None = None

    def __post_init__(self) -> None:
        if not self.label:
            raise ValueError("lab feature label must be non-empty")
        if self.low is not None and self.high is not None and self.low > self.high:
            raise ValueError(f"lab feature {self.label!r}: low {self.low} > high {self.high}")

    @property
    def missing(self) -> bool:
        """True when the measurement value itself is absent (NaN)."""
        return math.isnan(self.value)

    def to_dict(self) -> dict[str, Any]:
        d: dict[str, Any] = {"label": self.label, "value": self.value, "unit": self.unit}
        if self.low is not None:
            d["low"] = self.low
        if self.high is not None:
            d["high"] = self.high
        return d

    @classmethod
    def from_dict(cls, d: dict[str, Any]) -> "LabFeature":
        return cls(
            label=d["label"],
            value=float(d["value"]),
            unit=d.get("unit", ""),
            low=None if d.get("low") is None else float(d["low"]),
            high=None if d.get("high") is None else float(d["high"]),
        )


@dataclass(frozen=True)
class Record:
    """One (patient, condition) case: an image, its lab features, and a binary label."""

    id: str
    image_ref: str
    features: tuple[LabFeature, ...]
    label_name: str
    label: int

    def __post_init__(self) -> None:
        if not self.id:
            raise ValueError("record id must be non-empty")
        if self.label_name not in CONDITIONS:
            raise UnknownLabelError(f"unknown condition {self.label_name!r}")
        if self.label not in (0, 1):
            raise ValueError(f"record label must be 0 or 1, got {self.label!r}")
        # Tolerate list inputs; store as tuple to stay hashable/immutable.
        if not isinstance(self.features, tuple):
            object.__setattr__(self, "features", tuple(self.features))

    def to_dict(self) -> dict[str, Any]:
        return {
            "id": self.id,
            "image_ref": self.image_ref,
            "label_name": self.label_name,
            "label": self.label,
            "features": [f.to_dict() for f in self.features],
        }

    @classmethod
    def from_dict(cls, d: dict[str, Any]) -> "Record":
        return cls(
            id=d["id"],
            image_ref=d["image_ref"],
            features=tuple(LabFeature.from_dict(f) for f in d.get("features", [])),
            label_name=d["label_name"],
            label=int(d["label"]),
        )


@dataclass(frozen=True)
class Candidate:
    """A record available as an in-context demonstration."""

    record: Record


@dataclass(frozen=True)
class QuerySample:
    """The record being diagnosed; its label is used only for scoring, never in prompts."""

    record: Record


@dataclass(frozen=True, eq=False)
class Embedding:
    """A fixed-length real vector with all entries finite."""

    values: np.ndarray

    def __post_init__(self) -> None:
        arr = np.asarray(self.values, dtype=np.float64)
        if arr.ndim != 1 or arr.size < 1:
            raise ValueError(f"embedding must be a non-empty 1-D vector, got shape {arr.shape}")
        if not np.all(np.isfinite(arr)):
            raise ValueError("embedding entries must all be finite")
        arr = arr.copy()
        arr.setflags(write=False)
        object.__setattr__(self, "values", arr)

    @property
    def dim(self) -> int:
        return int(self.values.shape[0])

    def __iter__(self) -> Iterator[float]:
        return iter(self.values.tolist())

    def tolist(self) -> list[float]:
        return self.values.tolist()


@dataclass(frozen=True)
class EmbeddedSample:
    """Paired image/text embeddings for one record.

    A channel may be absent when the run's modality never consults it
    (e.g. text-only selection needs no image embedding).
    """

    image_emb: Embedding | None = None
    text_emb: Embedding | None = None

    def __post_init__(self) -> None:
        if self.image_emb is None and self.text_emb is None:
            raise ValueError("an embedded sample needs at least one channel")


def require_condition(label_name: str) -> str:
    """Validate a condition name against the closed vocabulary."""
    if label_name not in CONDITIONS:
        raise UnknownLabelError(f"unknown condition {label_name!r}")
    return label_name
