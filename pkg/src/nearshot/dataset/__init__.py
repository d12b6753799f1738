"""Dataset construction: ingestion, feature selection, building, synthesis."""

from .build import SplitConfig, VqaDataset, build_dataset, load_dataset, write_dataset
from .features import (
    PearsonFeatureSelector,
    PearsonResult,
    pearson,
    rank_features,
    select_features,
    serialize_features,
)
from .ingest import (
    ChartEventRow,
    FeatureMatrix,
    ingest_chartevents,
    read_chartevents_csv,
    read_image_index_csv,
)
from .synth import SynthData, read_labels_csv, synth_generate, write_synth_data

__all__ = [
    "ChartEventRow",
    "FeatureMatrix",
    "PearsonFeatureSelector",
    "PearsonResult",
    "SplitConfig",
    "SynthData",
    "VqaDataset",
    "build_dataset",
    "ingest_chartevents",
    "load_dataset",
    "pearson",
    "rank_features",
    "read_chartevents_csv",
    "read_image_index_csv",
    "read_labels_csv",
    "select_features",
    "serialize_features",
    "synth_generate",
    "write_dataset",
    "write_synth_data",
]
