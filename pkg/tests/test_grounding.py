from __future__ import annotations

import numpy as np
import pytest
from PIL import Image

from nearshot.errors import (
    BoxOutsideImageError,
    ImageDecodeFailureError,
    InvalidParamsError,
    NoDetectionsError,
)
from nearshot.grounding import (
    Detection,
    GroundingQuery,
    crop,
    ground,
    select_region,
)


@pytest.fixture()
def image_100(tmp_path):
    path = tmp_path / "source.png"
    pixels = np.arange(100 * 100, dtype=np.uint8).reshape(100, 100)
    Image.fromarray(pixels, mode="L").save(path)
    return str(path)


def test_select_region_argmax():
    a = Detection(box=(0, 0, 10, 10), score=0.3)
    b = Detection(box=(5, 5, 20, 20), score=0.9)
    assert select_region([a, b]) is b


def test_select_region_singleton():
    a = Detection(box=(0, 0, 10, 10), score=0.5)
    assert select_region([a]) is a


def test_select_region_tie_goes_to_lowest_index():
    a = Detection(box=(0, 0, 10, 10), score=0.5)
    b = Detection(box=(5, 5, 20, 20), score=0.5)
    assert select_region([a, b]) is a


def test_select_region_empty_is_an_error():
    with pytest.raises(NoDetectionsError):
        select_region([])


def test_select_region_matches_brute_force_on_random_lists():
    rng = np.random.default_rng(99)
    for _ in range(200):
        n = int(rng.integers(1, 12))
        detections = []
        for _ in range(n):
            x0, y0 = int(rng.integers(0, 50)), int(rng.integers(0, 50))
            detections.append(Detection(
                box=(x0, y0, x0 + int(rng.integers(1, 30)), y0 + int(rng.integers(1, 30))),
                score=round(float(rng.choice([0.1, 0.25, 0.5, 0.5, 0.9], )), 4)))
        best = select_region(detections)
        # brute force: max score, ties by lowest index
        expected_idx = max(range(n), key=lambda i: (detections[i].score, -i))
        assert best is detections[expected_idx]


def test_select_region_invariant_under_score_scaling():
    detections = [
        Detection(box=(0, 0, 5, 5), score=0.8),
        Detection(box=(1, 1, 6, 6), score=0.4),
        Detection(box=(2, 2, 7, 7), score=0.6),
    ]
    scaled = [Detection(box=d.box, score=d.score * 0.5) for d in detections]
    assert select_region(detections).box == select_region(scaled).box


def test_detection_validates_box_and_score():
    with pytest.raises(ValueError):
        Detection(box=(10, 0, 5, 5), score=0.5)
    with pytest.raises(ValueError):
        Detection(box=(0, 0, 5, 5), score=1.5)


def test_crop_plain_rectangle(image_100, tmp_path):
    grounded = crop(image_100, (10, 10, 50, 50), padding_px=0, out_dir=tmp_path)
    assert grounded.box == (10, 10, 50, 50)
    with Image.open(grounded.image_ref) as img:
        assert img.size == (40, 40)


def test_crop_clamps_padding_to_bounds(image_100, tmp_path):
    grounded = crop(image_100, (90, 90, 99, 99), padding_px=20, out_dir=tmp_path)
    assert grounded.box == (70, 70, 100, 100)
    with Image.open(grounded.image_ref) as img:
        assert img.size == (30, 30)


def test_crop_padding_matches_expand_clamp_oracle(image_100, tmp_path):
    def oracle(box, pad, w, h):
        return (max(0, box[0] - pad), max(0, box[1] - pad),
                min(w, box[2] + pad), min(h, box[3] + pad))

    grounded = crop(image_100, (10, 10, 50, 50), padding_px=5, out_dir=tmp_path)
    assert grounded.box == oracle((10, 10, 50, 50), 5, 100, 100) == (5, 5, 55, 55)

    rng = np.random.default_rng(3)
    for _ in range(100):
        x0, y0 = int(rng.integers(0, 90)), int(rng.integers(0, 90))
        box = (x0, y0, x0 + int(rng.integers(1, 40)), y0 + int(rng.integers(1, 40)))
        pad = int(rng.integers(0, 40))
        grounded = crop(image_100, box, padding_px=pad, out_dir=tmp_path)
        assert grounded.box == oracle(box, pad, 100, 100)
        gx0, gy0, gx1, gy1 = grounded.box
        assert 0 <= gx0 < gx1 <= 100 and 0 <= gy0 < gy1 <= 100


def test_crop_clamps_negative_origin(image_100, tmp_path):
    grounded = crop(image_100, (-5, -8, 20, 30), padding_px=0, out_dir=tmp_path)
    assert grounded.box == (0, 0, 20, 30)


def test_crop_rejects_disjoint_box(image_100, tmp_path):
    with pytest.raises(BoxOutsideImageError):
        crop(image_100, (200, 200, 240, 240), padding_px=0, out_dir=tmp_path)


def test_crop_rejects_negative_padding(image_100, tmp_path):
    with pytest.raises(InvalidParamsError):
        crop(image_100, (0, 0, 10, 10), padding_px=-1, out_dir=tmp_path)


def test_crop_missing_or_unreadable_image(tmp_path):
    with pytest.raises(ImageDecodeFailureError):
        crop(str(tmp_path / "nope.png"), (0, 0, 5, 5))
    bogus = tmp_path / "bogus.png"
    bogus.write_text("this is not an image")
    with pytest.raises(ImageDecodeFailureError):
        crop(str(bogus), (0, 0, 5, 5))


def test_crop_is_deterministic(image_100, tmp_path):
    first = crop(image_100, (10, 10, 30, 30), out_dir=tmp_path)
    second = crop(image_100, (10, 10, 30, 30), out_dir=tmp_path)
    assert first.image_ref == second.image_ref


class StubDetector:
    def __init__(self, detections):
        self.detections = detections
        self.calls = 0

    def detect(self, image_ref, condition_text):
        self.calls += 1
        return self.detections


def test_ground_disabled_is_identity(image_100):
    result = ground(image_100, GroundingQuery("Pneumonia"), backend=None,
                    vg_enabled=False)
    assert result.image_ref == image_100
    assert result.grounded is None and not result.miss


def test_ground_crops_highest_scoring_region(image_100, tmp_path):
    detector = StubDetector([
        Detection(box=(0, 0, 20, 20), score=0.3),
        Detection(box=(40, 40, 80, 80), score=0.9),
    ])
    result = ground(image_100, GroundingQuery("Edema"), detector,
                    vg_enabled=True, out_dir=tmp_path)
    assert result.grounded is not None
    assert result.grounded.box == (40, 40, 80, 80)
    with Image.open(result.image_ref) as img:
        assert img.size == (40, 40)


def test_ground_zero_detections_passes_through_with_miss_flag(image_100):
    detector = StubDetector([])
    result = ground(image_100, GroundingQuery("Edema"), detector, vg_enabled=True)
    assert result.image_ref == image_100
    assert result.miss and result.grounded is None


def test_ground_enabled_requires_backend(image_100):
    with pytest.raises(InvalidParamsError):
        ground(image_100, GroundingQuery("Edema"), backend=None, vg_enabled=True)


def test_grounding_query_must_be_non_empty():
    with pytest.raises(ValueError):
        GroundingQuery("")
