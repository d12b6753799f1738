"""Build the in-context VQA dataset and read/write its file format.

One record per (patient, condition) with a binary label. Records are
written as JSON Lines with a sidecar manifest holding the per-label
feature lists, split counts, and provenance. Candidate pools are drawn
per label with at least one positive and one negative placed first, so
any pool prefix of size >= 2 still covers both classes.
"""

from __future__ import annotations

import json
import zlib
from dataclasses import dataclass, field
from pathlib import Path
from typing import Any

import numpy as np
import pandas as pd

from ..errors import (
    DatasetFormatError,
    InsufficientClassExamplesError,
    InvalidParamsError,
)
from ..types import Candidate, QuerySample, Record, require_condition
from .features import DEFAULT_FEATURES_PER_LABEL, rank_features
from .ingest import FeatureMatrix

BUILDER_VERSION = "0.1.0"
SPLIT_CANDIDATE = "candidate"
SPLIT_QUERY = "query"
DEFAULT_POOL_SIZE = 6


@dataclass(frozen=True)
class SplitConfig:
    """How many records per label form the candidate pool."""

    pool_size: int = DEFAULT_POOL_SIZE

    def __post_init__(self) -> None:
        if self.pool_size < 2:
            raise InvalidParamsError(
                f"pool_size must be >= 2 to cover both classes, got {self.pool_size}")


@dataclass
class VqaDataset:
    """Records plus split assignments, per-label features, and provenance."""

    records: list[Record]
    splits: dict[str, str]
    label_features: dict[str, list[str]]
    provenance: dict[str, Any] = field(default_factory=dict)

    def __post_init__(self) -> None:
        self.validate()

    @property
    def labels(self) -> list[str]:
        return sorted(self.label_features)

    def candidates(self, label_name: str) -> list[Candidate]:
        return [Candidate(r) for r in self.records
                if r.label_name == label_name and self.splits[r.id] == SPLIT_CANDIDATE]

    def queries(self, label_name: str) -> list[QuerySample]:
        return [QuerySample(r) for r in self.records
                if r.label_name == label_name and self.splits[r.id] == SPLIT_QUERY]

    def validate(self) -> None:
        seen: set[str] = set()
        for record in self.records:
            if record.id in seen:
                raise DatasetFormatError(f"duplicate record id {record.id!r}")
            seen.add(record.id)
            if record.id not in self.splits:
                raise DatasetFormatError(f"record {record.id!r} has no split assignment")
            if record.label_name not in self.label_features:
                raise DatasetFormatError(
                    f"record {record.id!r} references label {record.label_name!r} "
                    f"missing from the manifest")
        for label in self.label_features:
            allowed = set(self.label_features[label])
            pool_names: set[str] = set()
            for cand in self.candidates(label):
                pool_names.update(f.label for f in cand.record.features)
            for query in self.queries(label):
                names = {f.label for f in query.record.features}
                if not names <= allowed:
                    raise DatasetFormatError(
                        f"query {query.record.id!r} carries features outside "
                        f"the per-label list: {sorted(names - allowed)}")
                if not names <= pool_names:
                    raise DatasetFormatError(
                        f"query {query.record.id!r} carries features not "
                        f"represented in the candidate pool: {sorted(names - pool_names)}")


def build_dataset(
    matrix: FeatureMatrix,
    labels: pd.DataFrame,
    image_index: dict[str, str],
    k: int = DEFAULT_FEATURES_PER_LABEL,
    split: SplitConfig = SplitConfig(),
    seed: int = 0,
    source: str = "unknown",
    ranking: str = "abs",
) -> VqaDataset:
    """Assemble records, select per-label features, and split pools.

    ``labels`` is a patients x conditions frame of {0,1}. The per-label
    feature list is the top-k correlation ranking reduced to features that
    at least one pool candidate actually carries, so every query's features
    are represented among the candidates.
    """
    for condition in labels.columns:
        require_condition(str(condition))
    patients = [p for p in matrix.patients if p in labels.index]
    if not patients:
        raise InvalidParamsError("no patients shared between matrix and label frame")
    missing_images = [p for p in patients if p not in image_index]
    if missing_images:
        raise InvalidParamsError(
            f"{len(missing_images)} patient(s) lack an image reference, "
            f"e.g. {missing_images[:3]}")
    if split.pool_size >= len(patients):
        raise InvalidParamsError(
            f"pool_size {split.pool_size} must leave at least one query "
            f"({len(patients)} patients available)")

    records: list[Record] = []
    splits: dict[str, str] = {}
    label_features: dict[str, list[str]] = {}
    label_stats: dict[str, dict[str, int]] = {}

    for condition in sorted(str(c) for c in labels.columns):
        y = labels.loc[patients, condition].astype(int)
        ranked = [s.name for s in rank_features(matrix.frame.loc[patients], y.to_numpy(),
                                                ranking=ranking)[:k]]

        rng = np.random.default_rng([seed, zlib.crc32(condition.encode("utf-8"))])
        order = [patients[i] for i in rng.permutation(len(patients))]
        positives = [p for p in order if y[p] == 1]
        negatives = [p for p in order if y[p] == 0]
        if not positives or not negatives:
            raise InsufficientClassExamplesError(condition)

        pool = [positives[0], negatives[0]]
        pool += [p for p in order if p not in pool][: split.pool_size - 2]
        pool_set = set(pool)
        queries = [p for p in order if p not in pool_set]

        # Keep only ranked features some pool candidate actually carries, so
        # query features are always represented among the shots.
        carried = {
            name for p in pool
            for name in (matrix.observations.get(p) or {})
        }
        final_features = [name for name in ranked if name in carried]
        label_features[condition] = final_features

        n_pos = n_neg = 0
        for patient in pool + queries:
            label_value = int(y[patient])
            n_pos += label_value
            n_neg += 1 - label_value
            records.append(Record(
                id=f"{patient}:{condition}",
                image_ref=image_index[patient],
                features=tuple(matrix.features_for(patient, final_features)),
                label_name=condition,
                label=label_value,
            ))
            splits[records[-1].id] = SPLIT_CANDIDATE if patient in pool_set else SPLIT_QUERY
        label_stats[condition] = {
            "records": len(pool) + len(queries),
            "positives": n_pos,
            "negatives": n_neg,
            "candidates": len(pool),
            "queries": len(queries),
            "features": len(final_features),
        }

    provenance = {
        "builder_version": BUILDER_VERSION,
        "seed": seed,
        "source": source,
        "k": k,
        "ranking": ranking,
        "pool_size": split.pool_size,
        "malformed_rows": matrix.malformed_rows,
        "label_stats": label_stats,
    }
    return VqaDataset(records=records, splits=splits,
                      label_features=label_features, provenance=provenance)


def write_dataset(dataset: VqaDataset, path: str | Path) -> Path:
    """Write records as JSONL plus a ``<path>.manifest.json`` sidecar."""
    path = Path(path)
    path.parent.mkdir(parents=True, exist_ok=True)
    with path.open("w", encoding="utf-8") as handle:
        for record in dataset.records:
            row = record.to_dict()
            row["split"] = dataset.splits[record.id]
            handle.write(json.dumps(row, ensure_ascii=False, sort_keys=True,
                                    allow_nan=False))
            handle.write("\n")
    manifest = {
        "label_features": dataset.label_features,
        "provenance": dataset.provenance,
    }
    manifest_path = manifest_path_for(path)
    manifest_path.write_text(
        json.dumps(manifest, indent=2, ensure_ascii=False, sort_keys=True) + "\n",
        encoding="utf-8")
    return manifest_path


def manifest_path_for(path: str | Path) -> Path:
    return Path(str(path) + ".manifest.json")


def load_dataset(path: str | Path) -> VqaDataset:
    """Read a JSONL dataset and its manifest back into memory."""
    path = Path(path)
    if not path.exists():
        raise DatasetFormatError(f"dataset file not found: {path}")
    manifest_path = manifest_path_for(path)
    if not manifest_path.exists():
        raise DatasetFormatError(f"dataset manifest not found: {manifest_path}")
    try:
        manifest = json.loads(manifest_path.read_text(encoding="utf-8"))
    except json.JSONDecodeError as exc:
        raise DatasetFormatError(f"{manifest_path}: invalid JSON ({exc})") from exc

    records: list[Record] = []
    splits: dict[str, str] = {}
    with path.open(encoding="utf-8") as handle:
        for lineno, line in enumerate(handle, start=1):
            line = line.strip()
            if not line:
                continue
            try:
                row = json.loads(line)
                split = row.pop("split")
                record = Record.from_dict(row)
            except (json.JSONDecodeError, KeyError, ValueError, TypeError) as exc:
                raise DatasetFormatError(f"{path} line {lineno}: {exc}") from exc
            if split not in (SPLIT_CANDIDATE, SPLIT_QUERY):
                raise DatasetFormatError(
                    f"{path} line {lineno}: unknown split {split!r}")
            records.append(record)
            splits[record.id] = split

    return VqaDataset(
        records=records,
        splits=splits,
        label_features={str(k): list(v) for k, v in manifest.get("label_features", {}).items()},
        provenance=manifest.get("provenance", {}),
    )
