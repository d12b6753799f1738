"""nearshot: grounded few-shot prompting with proximity-based shot selection.

The pipeline grounds each image to its most relevant region, scores
candidate demonstrations by fused cosine similarity to the query, keeps
those above a threshold (most similar placed directly before the query),
assembles an interleaved image/text prompt, and evaluates binary
diagnostic answers. All model inference sits behind pluggable backends
with deterministic mocks.
"""

from .backends import BackendSet, HttpBackendClient, MockConfig, make_mock_backends
from .evaluation import (
    ConfusionMatrix,
    ExperimentConfig,
    Metrics,
    Report,
    UnparseablePolicy,
    confusion,
    metrics,
    run_experiment,
    sweep,
)
from .grounding import Detection, GroundedImage, GroundingQuery, crop, ground, select_region
from .prompt import (
    PromptSequence,
    TemplateKind,
    assemble_prompt,
    parse_answer,
    render_question,
)
from .selection import (
    PromptOrder,
    ProximitySelector,
    ScoredCandidate,
    SelectionConfig,
    retention_curve,
    select_shots,
)
from .similarity import cosine, fused_score, mean_pool
from .types import (
    CONDITIONS,
    Candidate,
    EmbeddedSample,
    Embedding,
    LabFeature,
    Modality,
    Outcome,
    Prediction,
    QuerySample,
    Record,
)

__version__ = "0.1.0"

__all__ = [
    "BackendSet",
    "CONDITIONS",
    "Candidate",
    "ConfusionMatrix",
    "Detection",
    "EmbeddedSample",
    "Embedding",
    "ExperimentConfig",
    "GroundedImage",
    "GroundingQuery",
    "HttpBackendClient",
    "LabFeature",
    "Metrics",
    "MockConfig",
    "Modality",
    "Outcome",
    "Prediction",
    "PromptOrder",
    "PromptSequence",
    "ProximitySelector",
    "QuerySample",
    "Record",
    "Report",
    "ScoredCandidate",
    "SelectionConfig",
    "TemplateKind",
    "UnparseablePolicy",
    "assemble_prompt",
    "confusion",
    "cosine",
    "crop",
    "fused_score",
    "ground",
    "make_mock_backends",
    "mean_pool",
    "metrics",
    "parse_answer",
    "render_question",
    "retention_curve",
    "run_experiment",
    "select_region",
    "select_shots",
    "sweep",
]
