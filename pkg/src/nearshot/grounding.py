"""Region grounding: narrow an image to the detector's best region.

The detector backend proposes scored regions for a condition phrase; this
module owns the pure selection logic (argmax over scores), the padded
crop, and the fallback behaviour when grounding is disabled or the
detector finds nothing.
"""

from __future__ import annotations

import hashlib
import logging
from dataclasses import dataclass
from pathlib import Path
from typing import Protocol, Sequence

from PIL import Image, UnidentifiedImageError

from .errors import (
    BoxOutsideImageError,
    ImageDecodeFailureError,
    InvalidParamsError,
    NoDetectionsError,
)

logger = logging.getLogger(__name__)

Box = tuple[int, int, int, int]


@dataclass(frozen=True)
class Detection:
    """A scored region proposal in pixel coordinates."""

    box: Box
    score: float

    def __post_init__(self) -> None:
        x0, y0, x1, y1 = self.box
        if not (x0 < x1 and y0 < y1):
            raise ValueError(f"degenerate detection box {self.box}")
        if not 0.0 <= self.score <= 1.0:
            raise ValueError(f"detection score must lie in [0, 1], got {self.score}")


@dataclass(frozen=True)
class GroundingQuery:
    """The condition phrase handed to the zero-shot detector."""

    condition_text: str

    def __post_init__(self) -> None:
        if not self.condition_text:
            raise ValueError("grounding query text must be non-empty")


@dataclass(frozen=True)
class GroundedImage:
    """A crop of the chosen region, written to its own image file."""

    source_ref: str
    box: Box
    padding_px: int
    image_ref: str


@dataclass(frozen=True)
class GroundingResult:
    """Outcome of grounding one image: the ref to prompt/embed with.

    ``image_ref`` is the cropped file when grounding succeeded, otherwise
    the untouched source ref. ``miss`` is set when grounding was enabled
    but the detector returned nothing.
    """

    image_ref: str
    grounded: GroundedImage | None = None
    miss: bool = False


class DetectorBackend(Protocol):
    def detect(self, image_ref: str, condition_text: str) -> list[Detection]: ...


def select_region(detections: Sequence[Detection]) -> Detection:
    """The highest-scoring detection; ties go to the lowest list index."""
    if not detections:
        raise NoDetectionsError("no detections to select from")
    best = detections[0]
    for det in detections[1:]:
        if det.score > best.score:
            best = det
    return best


def crop(image_ref: str, box: Box, padding_px: int = 0,
         out_dir: str | Path | None = None) -> GroundedImage:
    """Crop ``box`` expanded by ``padding_px`` per side, clamped to bounds.

    The crop is written next to the source (or under ``out_dir``) with a
    content-derived name, so repeated runs produce identical files.
    """
    if padding_px < 0:
        raise InvalidParamsError(f"padding_px must be >= 0, got {padding_px}")
    try:
        with Image.open(image_ref) as img:
            img.load()
            width, height = img.size
            rect = _padded_clamped(box, padding_px, width, height)
            cropped = img.crop(rect)
    except FileNotFoundError as exc:
        raise ImageDecodeFailureError(f"image not found: {image_ref}") from exc
    except UnidentifiedImageError as exc:
        raise ImageDecodeFailureError(f"cannot decode image: {image_ref}") from exc

    dest_dir = Path(out_dir) if out_dir is not None else Path(image_ref).parent
    dest_dir.mkdir(parents=True, exist_ok=True)
    tag = hashlib.sha256(
        f"{Path(image_ref).name}|{box}|{padding_px}".encode("utf-8")
    ).hexdigest()[:16]
    out_path = dest_dir / f"crop_{tag}.png"
    cropped.save(out_path, format="PNG")
    return GroundedImage(
        source_ref=str(image_ref),
        box=rect,
        padding_px=padding_px,
        image_ref=str(out_path),
    )


def _padded_clamped(box: Box, padding_px: int, width: int, height: int) -> Box:
    x0, y0, x1, y1 = box
    if x1 <= 0 or y1 <= 0 or x0 >= width or y0 >= height:
        raise BoxOutsideImageError(
            f"box {box} does not intersect a {width}x{height} image")
    x0 = max(0, x0 - padding_px)
    y0 = max(0, y0 - padding_px)
    x1 = min(width, x1 + padding_px)
    y1 = min(height, y1 + padding_px)
    return (x0, y0, x1, y1)


def ground(
    image_ref: str,
    query: GroundingQuery,
    backend: DetectorBackend | None,
    vg_enabled: bool = True,
    padding_px: int = 0,
    out_dir: str | Path | None = None,
) -> GroundingResult:
    """Detect, pick the best region, and crop; pass through when disabled.

    With grounding off the original image ref is returned untouched. A
    detector miss (zero detections) also passes through, flagged rather
    than raised, so an evaluation never aborts on one undetectable image.
    """
    if not vg_enabled:
        return GroundingResult(image_ref=image_ref)
    if backend is None:
        raise InvalidParamsError("grounding is enabled but no detector backend was provided")
    detections = backend.detect(image_ref, query.condition_text)
    if not detections:
        logger.warning("grounding miss: no detections for %r on %s",
                       query.condition_text, image_ref)
        return GroundingResult(image_ref=image_ref, miss=True)
    best = select_region(detections)
    grounded = crop(image_ref, best.box, padding_px, out_dir=out_dir)
    return GroundingResult(image_ref=grounded.image_ref, grounded=grounded)
