"""Chart-event ingestion: stream lab rows into a patient-by-feature matrix.

Input CSVs use columns ``patient_id,label,value,unit,low,high`` with "-" or
an empty string marking a missing bound. Malformed rows are skipped (with
their line number logged) rather than aborting the stream; the skip count
is surfaced on the resulting matrix.
"""

from __future__ import annotations

import csv
import logging
import math
from dataclasses import dataclass, field
from pathlib import Path
from typing import Iterable, Iterator

import pandas as pd

from ..errors import DatasetFormatError
from ..types import LabFeature

logger = logging.getLogger(__name__)

CHARTEVENTS_COLUMNS = ["patient_id", "label", "value", "unit", "low", "high"]
IMAGE_INDEX_COLUMNS = ["patient_id", "image_path"]


@dataclass(frozen=True)
class ChartEventRow:
    """One lab observation for one patient."""

    patient_id: str
    label: str
    value: float
    unit: str = ""
    low: float | None = None
    high: float | None = None

    def __post_init__(self) -> None:
        if not self.patient_id or not self.label:
            raise ValueError("patient_id and label must be non-empty")
        if not math.isfinite(self.value):
            raise ValueError(f"value must be finite, got {self.value!r}")
        if self.low is not None and self.high is not None and self.low > self.high:
            raise ValueError(f"low {self.low} > high {self.high}")


@dataclass
class FeatureMatrix:
    """Patients x lab features, with the last observation per cell kept."""

    frame: pd.DataFrame
    observations: dict[str, dict[str, LabFeature]] = field(default_factory=dict)
    malformed_rows: int = 0

    @property
    def patients(self) -> list[str]:
        return list(self.frame.index)

    @property
    def feature_names(self) -> list[str]:
        return list(self.frame.columns)

    def features_for(self, patient_id: str, names: Iterable[str]) -> list[LabFeature]:
        """The patient's present observations among ``names``, in order."""
        per_patient = self.observations.get(patient_id, {})
        return [per_patient[n] for n in names if n in per_patient]


def ingest_chartevents(rows: Iterable[ChartEventRow], malformed_rows: int = 0) -> FeatureMatrix:
    """Fold an observation stream into one row per patient.

    Repeated (patient, label) pairs keep the last observation seen; cells
    never observed stay missing (NaN).
    """
    observations: dict[str, dict[str, LabFeature]] = {}
    for row in rows:
        observations.setdefault(row.patient_id, {})[row.label] = LabFeature(
            label=row.label, value=row.value, unit=row.unit, low=row.low, high=row.high)

    patients = sorted(observations)
    columns = sorted({name for per in observations.values() for name in per})
    data = {
        col: [
            observations[p][col].value if col in observations[p] else math.nan
            for p in patients
        ]
        for col in columns
    }
    frame = pd.DataFrame(data, index=patients, columns=columns, dtype=float)
    return FeatureMatrix(frame=frame, observations=observations,
                         malformed_rows=malformed_rows)


def read_chartevents_csv(path: str | Path) -> FeatureMatrix:
    """Parse a chartevents CSV and ingest it, skipping malformed rows."""
    rows: list[ChartEventRow] = []
    malformed = 0
    path = Path(path)
    if not path.exists():
        raise DatasetFormatError(f"chartevents file not found: {path}")
    with path.open(newline="", encoding="utf-8") as handle:
        reader = csv.DictReader(handle)
        _require_columns(reader.fieldnames, CHARTEVENTS_COLUMNS, path)
        for lineno, raw in enumerate(reader, start=2):
            try:
                rows.append(ChartEventRow(
                    patient_id=(raw["patient_id"] or "").strip(),
                    label=(raw["label"] or "").strip(),
                    value=_require_float(raw["value"]),
                    unit=(raw["unit"] or "").strip(),
                    low=_optional_float(raw["low"]),
                    high=_optional_float(raw["high"]),
                ))
            except (ValueError, TypeError) as exc:
                malformed += 1
                logger.warning("%s line %d: malformed row skipped (%s)", path, lineno, exc)
    if malformed:
        logger.warning("%s: skipped %d malformed row(s)", path, malformed)
    return ingest_chartevents(rows, malformed_rows=malformed)


def read_image_index_csv(path: str | Path) -> dict[str, str]:
    """Map patient ids to image paths; the last entry per patient wins."""
    path = Path(path)
    if not path.exists():
        raise DatasetFormatError(f"image index file not found: {path}")
    index: dict[str, str] = {}
    with path.open(newline="", encoding="utf-8") as handle:
        reader = csv.DictReader(handle)
        _require_columns(reader.fieldnames, IMAGE_INDEX_COLUMNS, path)
        for raw in reader:
            patient = (raw["patient_id"] or "").strip()
            image = (raw["image_path"] or "").strip()
            if patient and image:
                index[patient] = image
    return index


def _require_columns(fieldnames: Iterator[str] | None, expected: list[str],
                     path: Path) -> None:
    missing = set(expected) - set(fieldnames or [])
    if missing:
        raise DatasetFormatError(
            f"{path}: missing required column(s) {sorted(missing)}; "
            f"expected header {','.join(expected)}")


def _require_float(text: str | None) -> float:
    if text is None or _is_missing(text):
        raise ValueError("value is missing")
    parsed = float(text)
    if not math.isfinite(parsed):
        raise ValueError(f"value {text!r} is not finite")
    return parsed


def _optional_float(text: str | None) -> float | None:
    if text is None or _is_missing(text):
        return None
    return float(text)


def _is_missing(text: str) -> bool:
    return text.strip() in ("", "-")
