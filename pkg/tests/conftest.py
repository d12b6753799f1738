from __future__ import annotations

from types import SimpleNamespace

import numpy as np
import pytest

from nearshot.backends import MockConfig, make_mock_backends
from nearshot.dataset import (
    SplitConfig,
    build_dataset,
    load_dataset,
    read_chartevents_csv,
    read_image_index_csv,
    read_labels_csv,
    synth_generate,
    write_dataset,
    write_synth_data,
)
from nearshot.types import Candidate, EmbeddedSample, Embedding, LabFeature, Record

SYNTH_LABELS = ["Cardiomegaly", "Edema", "Pneumonia"]
SYNTH_SEED = 7


def emb(*values: float) -> Embedding:
    return Embedding(np.asarray(values, dtype=np.float64))


def sample(image: Embedding | None = None, text: Embedding | None = None) -> EmbeddedSample:
    return EmbeddedSample(image_emb=image, text_emb=text)


def make_record(record_id: str = "p0:Cardiomegaly", label: int = 1,
                label_name: str = "Cardiomegaly", image_ref: str = "img.png",
                features: tuple[LabFeature, ...] = ()) -> Record:
    return Record(id=record_id, image_ref=image_ref, features=features,
                  label_name=label_name, label=label)


def text_pool(scores_as_vectors: list[tuple[float, float]]) -> list[tuple[Candidate, EmbeddedSample]]:
    """A text-modality pool whose cosines against query [1, 0] are exact."""
    pool = []
    for i, (x, y) in enumerate(scores_as_vectors):
        record = make_record(record_id=f"c{i}:Cardiomegaly", label=i % 2)
        pool.append((Candidate(record), sample(text=emb(x, y))))
    return pool


@pytest.fixture(scope="session")
def synth(tmp_path_factory) -> SimpleNamespace:
    out = tmp_path_factory.mktemp("synth")
    data = synth_generate(seed=SYNTH_SEED, n_patients=60, n_features=24,
                          labels=SYNTH_LABELS, out_dir=out)
    paths = write_synth_data(data, out)
    return SimpleNamespace(data=data, paths=paths, dir=out)


@pytest.fixture(scope="session")
def synth_dataset(synth, tmp_path_factory):
    matrix = read_chartevents_csv(synth.paths["chartevents"])
    index = read_image_index_csv(synth.paths["image_index"])
    labels = read_labels_csv(synth.paths["labels"])
    dataset = build_dataset(matrix, labels, index, k=10,
                            split=SplitConfig(pool_size=12),
                            seed=SYNTH_SEED, source="synthetic")
    path = tmp_path_factory.mktemp("dataset") / "synth.jsonl"
    write_dataset(dataset, path)
    loaded = load_dataset(path)
    loaded.path = path  # convenience for CLI tests
    return loaded


@pytest.fixture(scope="session")
def mock_backends():
    return make_mock_backends(MockConfig(seed=SYNTH_SEED))
