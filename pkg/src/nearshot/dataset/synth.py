"""Seeded synthetic stand-in for restricted clinical source data.

Generates chart-event rows with correlations planted between designated
lab features and each condition label, plus small grayscale images where
each positive condition paints a rectangle at a condition-specific slot
using the intensity convention the mock detector scores against. Both
channels therefore carry class signal for the deterministic mock stack.
"""

from __future__ import annotations

import csv
import json
import zlib
from dataclasses import dataclass, field
from pathlib import Path
from typing import Any, Sequence

import numpy as np
import pandas as pd
from PIL import Image

from ..backends.mock import condition_intensity
from ..errors import DatasetFormatError, InvalidParamsError
from ..types import CONDITIONS, require_condition
from .ingest import CHARTEVENTS_COLUMNS, IMAGE_INDEX_COLUMNS, ChartEventRow

IMAGE_SIZE = 96
BACKGROUND_INTENSITY = 144
BACKGROUND_NOISE = 6

_UNITS = ("mg/dL", "mmol/L", "sec", "L/min", "%", "cmH2O", "mL", "")


@dataclass
class SynthData:
    """Generated rows, image index, and the planted ground truth."""

    rows: list[ChartEventRow]
    image_index: dict[str, str]
    planted: dict[str, list[str]]
    labels: dict[str, dict[str, int]]  # patient -> condition -> {0,1}
    params: dict[str, Any] = field(default_factory=dict)


def _feature_name(index: int) -> str:
    return f"Lab Test {index + 1:02d}"


def _condition_slot(condition: str) -> tuple[int, int, int, int]:
    """The image rectangle conventionally painted for a condition."""
    idx = CONDITIONS.index(condition)
    col, row = idx % 4, idx // 4
    x0 = 6 + col * 22
    y0 = 8 + row * 28
    return (x0, y0, x0 + 16, y0 + 22)


def synth_generate(
    seed: int,
    n_patients: int,
    n_features: int,
    labels: Sequence[str],
    out_dir: str | Path,
    missingness: float = 0.2,
) -> SynthData:
    """Generate lab rows and images under ``out_dir`` deterministically."""
    if n_patients < 4:
        raise InvalidParamsError(f"n_patients must be >= 4, got {n_patients}")
    if n_features < 2:
        raise InvalidParamsError(f"n_features must be >= 2, got {n_features}")
    if not labels:
        raise InvalidParamsError("at least one condition label required")
    if len(set(labels)) != len(labels):
        raise InvalidParamsError("condition labels must be unique")
    for label in labels:
        require_condition(label)
    if not 0.0 <= missingness < 1.0:
        raise InvalidParamsError(f"missingness must lie in [0, 1), got {missingness}")

    conditions = sorted(labels)
    out_dir = Path(out_dir)
    image_dir = out_dir / "images"
    image_dir.mkdir(parents=True, exist_ok=True)

    rng = np.random.default_rng(seed)
    patients = [f"p{idx:04d}" for idx in range(n_patients)]

    # Per-condition binary labels with both classes guaranteed twice over.
    assignment = rng.integers(0, 2, size=(n_patients, len(conditions)))
    for j in range(len(conditions)):
        while assignment[:, j].sum() < 2:
            assignment[int(rng.integers(0, n_patients)), j] = 1
        while (1 - assignment[:, j]).sum() < 2:
            assignment[int(rng.integers(0, n_patients)), j] = 0

    feature_names = [_feature_name(i) for i in range(n_features)]
    bases = rng.uniform(5.0, 80.0, size=n_features)

    # Each condition plants two features: one encodes the class exactly,
    # the second carries a small label-flip noise so rankings stay distinct.
    planted: dict[str, list[str]] = {}
    planted_spec: dict[str, tuple[int, float, float]] = {}
    for j, condition in enumerate(conditions):
        idx_a = (2 * j) % n_features
        idx_b = (2 * j + 1) % n_features
        planted[condition] = [feature_names[idx_a], feature_names[idx_b]]
        low = float(2 + 3 * j)
        high = low + 9.0
        planted_spec[feature_names[idx_a]] = (j, low, high)
        planted_spec[feature_names[idx_b]] = (j, low, high)

    flip_mask = rng.random(size=(n_patients, n_features)) < 0.05
    noise = rng.normal(0.0, 1.0, size=(n_patients, n_features))
    missing_mask = rng.random(size=(n_patients, n_features)) < missingness

    rows: list[ChartEventRow] = []
    for i, patient in enumerate(patients):
        for f, name in enumerate(feature_names):
            if missing_mask[i, f]:
                continue
            unit = _UNITS[f % len(_UNITS)]
            if name in planted_spec:
                j, low_val, high_val = planted_spec[name]
                label_bit = int(assignment[i, j])
                is_secondary = name == planted[conditions[j]][1]
                if is_secondary and flip_mask[i, f]:
                    label_bit = 1 - label_bit
                value = high_val if label_bit == 1 else low_val
            else:
                value = round(float(bases[f] + noise[i, f] * bases[f] * 0.12), 1)
            has_bounds = f % 2 == 0
            rows.append(ChartEventRow(
                patient_id=patient,
                label=name,
                value=value,
                unit=unit,
                low=round(float(bases[f] * 0.8), 1) if has_bounds else None,
                high=round(float(bases[f] * 1.2), 1) if has_bounds else None,
            ))

    image_index: dict[str, str] = {}
    for i, patient in enumerate(patients):
        img_rng = np.random.default_rng([seed, zlib.crc32(patient.encode("utf-8"))])
        pixels = np.full((IMAGE_SIZE, IMAGE_SIZE), BACKGROUND_INTENSITY, dtype=np.int64)
        pixels += img_rng.integers(-BACKGROUND_NOISE, BACKGROUND_NOISE + 1,
                                   size=pixels.shape)
        for j, condition in enumerate(conditions):
            if assignment[i, j] == 1:
                x0, y0, x1, y1 = _condition_slot(condition)
                pixels[y0:y1, x0:x1] = condition_intensity(condition)
        path = image_dir / f"{patient}.png"
        Image.fromarray(pixels.astype(np.uint8), mode="L").save(path, format="PNG")
        image_index[patient] = str(path)

    label_map = {
        patient: {cond: int(assignment[i, j]) for j, cond in enumerate(conditions)}
        for i, patient in enumerate(patients)
    }
    params = {
        "seed": seed,
        "n_patients": n_patients,
        "n_features": n_features,
        "labels": conditions,
        "missingness": missingness,
    }
    return SynthData(rows=rows, image_index=image_index, planted=planted,
                     labels=label_map, params=params)


def write_synth_data(data: SynthData, out_dir: str | Path) -> dict[str, Path]:
    """Write chartevents.csv, image_index.csv, labels.csv and a manifest."""
    out_dir = Path(out_dir)
    out_dir.mkdir(parents=True, exist_ok=True)

    chartevents = out_dir / "chartevents.csv"
    with chartevents.open("w", newline="", encoding="utf-8") as handle:
        writer = csv.writer(handle)
        writer.writerow(CHARTEVENTS_COLUMNS)
        for row in data.rows:
            writer.writerow([
                row.patient_id,
                row.label,
                _format(row.value),
                row.unit,
                "-" if row.low is None else _format(row.low),
                "-" if row.high is None else _format(row.high),
            ])

    image_index = out_dir / "image_index.csv"
    with image_index.open("w", newline="", encoding="utf-8") as handle:
        writer = csv.writer(handle)
        writer.writerow(IMAGE_INDEX_COLUMNS)
        for patient in sorted(data.image_index):
            writer.writerow([patient, data.image_index[patient]])

    conditions = data.params["labels"]
    labels_csv = out_dir / "labels.csv"
    with labels_csv.open("w", newline="", encoding="utf-8") as handle:
        writer = csv.writer(handle)
        writer.writerow(["patient_id", *conditions])
        for patient in sorted(data.labels):
            writer.writerow([patient, *(data.labels[patient][c] for c in conditions)])

    manifest = out_dir / "synth_manifest.json"
    manifest.write_text(json.dumps({
        "params": data.params,
        "planted": data.planted,
    }, indent=2, sort_keys=True) + "\n", encoding="utf-8")

    return {"chartevents": chartevents, "image_index": image_index,
            "labels": labels_csv, "manifest": manifest}


def read_labels_csv(path: str | Path) -> pd.DataFrame:
    """Load the patients x conditions label frame written by write_synth_data."""
    path = Path(path)
    if not path.exists():
        raise DatasetFormatError(f"labels file not found: {path}")
    frame = pd.read_csv(path, dtype={"patient_id": str})
    if "patient_id" not in frame.columns:
        raise DatasetFormatError(f"{path}: missing required column 'patient_id'")
    frame = frame.set_index("patient_id")
    for column in frame.columns:
        values = set(frame[column].unique().tolist())
        if not values <= {0, 1}:
            raise DatasetFormatError(
                f"{path}: label column {column!r} must be binary, got {sorted(values)}")
    return frame


def _format(value: float) -> str:
    if float(value).is_integer():
        return str(int(value))
    return repr(float(value))
