"""Question rendering, interleaved prompt assembly, and answer parsing.

The template strings are a public contract: downstream prompts and the
golden tests depend on them byte-for-byte.
"""

from __future__ import annotations

import re
from dataclasses import dataclass
from enum import Enum
from typing import Sequence, Union

from .errors import (
    MissingImageError,
    PromptBudgetExceededError,
    ZeroShotsError,
)
from .serialization import serialize_features
from .selection import PromptOrder
from .types import LabFeature, Outcome, Prediction, QuerySample, require_condition

# Shot answers are rendered as these literal strings to keep the
# generation space binary.
ANSWER_POSITIVE = "yes"
ANSWER_NEGATIVE = "no"

DEFAULT_MAX_PROMPT_CHARS = 8000


class TemplateKind(Enum):
    """The three prompt flavours: image-only, EHR-text-only, or both."""

    IMAGE_TEXT = "image-text"
    EHR_TEXT = "ehr-text"
    IMAGE_EHR_TEXT = "image-ehr-text"

    @classmethod
    def from_string(cls, value: str) -> "TemplateKind":
        try:
            return cls(value.lower())
        except ValueError:
            raise ValueError(f"unknown template {value!r}; expected one of "
                             f"{[k.value for k in cls]}") from None

    @property
    def has_images(self) -> bool:
        return self is not TemplateKind.EHR_TEXT

    @property
    def has_ehr(self) -> bool:
        return self is not TemplateKind.IMAGE_TEXT


@dataclass(frozen=True)
class ImageSlot:
    """A position in the prompt where an image is injected."""

    image_ref: str


@dataclass(frozen=True)
class TextSegment:
    text: str

    def __post_init__(self) -> None:
        if not self.text:
            raise ValueError("text segments must be non-empty")


PromptSegment = Union[ImageSlot, TextSegment]


@dataclass(frozen=True)
class PromptSequence:
    """Ordered interleaved image/text segments fed to the generator."""

    segments: tuple[PromptSegment, ...]
    shot_count: int

    def __post_init__(self) -> None:
        if self.shot_count < 1:
            raise ZeroShotsError("a prompt must contain at least one shot")
        if not self.segments:
            raise ValueError("a prompt must contain at least one segment")

    @property
    def image_refs(self) -> list[str]:
        return [s.image_ref for s in self.segments if isinstance(s, ImageSlot)]

    @property
    def texts(self) -> list[str]:
        return [s.text for s in self.segments if isinstance(s, TextSegment)]

    def char_count(self) -> int:
        return sum(len(t) for t in self.texts)


def render_question(label_name: str, features: Sequence[LabFeature],
                    kind: TemplateKind) -> str:
    """Render the diagnostic question for one record.

    EHR-bearing templates append the serialized lab results; when a record
    has no serializable features the question falls back to the plain
    wording rather than dangling an empty clause.
    """
    require_condition(label_name)
    serialized = serialize_features(features) if kind.has_ehr else ""
    if serialized:
        return (f"Question: Is the patient likely to have {label_name}, "
                f"given the following laboratory test results: {serialized}?")
    return f"Question: Is the patient likely to have {label_name}?"


def answer_text(label: int) -> str:
    return ANSWER_POSITIVE if label == 1 else ANSWER_NEGATIVE


def assemble_prompt(
    shots: PromptOrder,
    query: QuerySample,
    query_image_ref: str | None,
    kind: TemplateKind,
    max_chars: int = DEFAULT_MAX_PROMPT_CHARS,
) -> PromptSequence:
    """Interleave shot demonstrations and the query question.

    Each shot contributes [image?][question][answer]; the query contributes
    [image?][question] with no answer, so the shot placed last by selection
    is the one directly before the query. The query's label is never read.
    """
    if len(shots) == 0:
        raise ZeroShotsError("prompt assembly requires at least one shot")

    segments: list[PromptSegment] = []
    for shot in shots:
        record = shot.candidate.record
        if kind.has_images:
            if not record.image_ref:
                raise MissingImageError(f"shot {record.id!r} has no image for template {kind.value}")
            segments.append(ImageSlot(record.image_ref))
        segments.append(TextSegment(render_question(record.label_name, record.features, kind)))
        segments.append(TextSegment(answer_text(record.label)))

    q = query.record
    if kind.has_images:
        if not query_image_ref:
            raise MissingImageError(f"query {q.id!r} has no image for template {kind.value}")
        segments.append(ImageSlot(query_image_ref))
    segments.append(TextSegment(render_question(q.label_name, q.features, kind)))

    sequence = PromptSequence(segments=tuple(segments), shot_count=len(shots))
    if sequence.char_count() > max_chars:
        raise PromptBudgetExceededError(
            f"prompt text is {sequence.char_count()} chars, budget is {max_chars}")
    return sequence


_WORD_YES = re.compile(r"\byes\b", re.IGNORECASE)
_WORD_NO = re.compile(r"\bno\b", re.IGNORECASE)


def parse_answer(generation: str) -> Prediction:
    """Map a generation to a binary outcome, or Unparseable.

    Only the first sentence of the first line is scanned, case-insensitively,
    for a standalone "yes" or "no"; finding neither or both yields
    Unparseable with the raw text retained. Every input maps to exactly one
    outcome; this never raises.
    """
    first_line = generation.splitlines()[0] if generation else ""
    sentence = re.split(r"[.!?]", first_line, maxsplit=1)[0]
    has_yes = bool(_WORD_YES.search(sentence))
    has_no = bool(_WORD_NO.search(sentence))
    if has_yes and not has_no:
        return Prediction(Outcome.POSITIVE, generation)
    if has_no and not has_yes:
        return Prediction(Outcome.NEGATIVE, generation)
    return Prediction(Outcome.UNPARSEABLE, generation)
