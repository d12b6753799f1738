"""Experiment runner, metrics, and ablation sweeps.

A run walks every query in the dataset: ground the image (when grounding
is on), embed, select shots (proximity selection, or a seeded shuffle of
the fixed pool when selection is off), assemble the prompt, generate, and
parse. Results aggregate into a Report with confusion counts, the four
headline metrics plus a support-weighted F1, a per-label breakdown, and
the retained-shot histogram.
"""

from __future__ import annotations

import json
import logging
import tempfile
import threading
import zlib
from concurrent.futures import ThreadPoolExecutor
from dataclasses import dataclass, replace
from enum import Enum
from pathlib import Path
from typing import Any, Callable, Sequence

import numpy as np

from .backends.base import BackendSet, GenerateRequest
from .dataset.build import VqaDataset
from .errors import (
    BackendFailure,
    EmptyConfusionError,
    InvalidParamsError,
    LengthMismatchError,
)
from .grounding import GroundingQuery, GroundingResult, ground
from .prompt import PromptSequence, TemplateKind, assemble_prompt, parse_answer
from .selection import PromptOrder, ScoredCandidate, SelectionConfig, select_shots
from .serialization import serialize_features
from .types import Candidate, EmbeddedSample, Modality, Outcome, Prediction, QuerySample

logger = logging.getLogger(__name__)

DEFAULT_THRESHOLD = 0.7
DEFAULT_SHOTS = 6

_NO_EHR_TEXT = "no laboratory test results"


class UnparseablePolicy(Enum):
    """How unparseable generations enter the confusion counts."""

    COUNT_INCORRECT = "count-incorrect"
    EXCLUDE = "exclude"

    @classmethod
    def from_string(cls, value: str) -> "UnparseablePolicy":
        try:
            return cls(value.lower())
        except ValueError:
            raise ValueError(f"unknown unparseable policy {value!r}") from None


@dataclass(frozen=True)
class ExperimentConfig:
    """One cell of the ablation grids."""

    dps_enabled: bool = True
    vg_enabled: bool = True
    modality: Modality = Modality.MULTIMODAL
    threshold: float = DEFAULT_THRESHOLD
    shots: int = DEFAULT_SHOTS
    template: TemplateKind = TemplateKind.IMAGE_EHR_TEXT
    seed: int = 0
    unparseable_policy: UnparseablePolicy = UnparseablePolicy.COUNT_INCORRECT
    max_prompt_chars: int = 8000

    def __post_init__(self) -> None:
        if self.shots < 1:
            raise InvalidParamsError(f"shots must be >= 1, got {self.shots}")
        if not -1.0 <= self.threshold <= 1.0:
            raise InvalidParamsError(f"threshold must lie in [-1, 1], got {self.threshold}")

    def to_dict(self) -> dict[str, Any]:
        return {
            "dps_enabled": self.dps_enabled,
            "vg_enabled": self.vg_enabled,
            "modality": self.modality.value,
            "threshold": self.threshold,
            "shots": self.shots,
            "template": self.template.value,
            "seed": self.seed,
            "unparseable_policy": self.unparseable_policy.value,
            "max_prompt_chars": self.max_prompt_chars,
        }

    @classmethod
    def from_dict(cls, d: dict[str, Any]) -> "ExperimentConfig":
        kwargs: dict[str, Any] = dict(d)
        if "modality" in kwargs:
            kwargs["modality"] = Modality.from_string(kwargs["modality"])
        if "template" in kwargs:
            kwargs["template"] = TemplateKind.from_string(kwargs["template"])
        if "unparseable_policy" in kwargs:
            kwargs["unparseable_policy"] = UnparseablePolicy.from_string(
                kwargs["unparseable_policy"])
        unknown = set(kwargs) - {f for f in cls.__dataclass_fields__}
        if unknown:
            raise InvalidParamsError(f"unknown config field(s): {sorted(unknown)}")
        return cls(**kwargs)

    def required_capabilities(self) -> tuple[str, ...]:
        """The backend capabilities this configuration actually touches."""
        needs: list[str] = ["generator"]
        if self.dps_enabled and self.modality in (Modality.TEXT, Modality.MULTIMODAL):
            needs.append("text_embedder")
        if self.dps_enabled and self.modality in (Modality.IMAGE, Modality.MULTIMODAL):
            needs.append("image_embedder")
        if self.vg_enabled and self._uses_images():
            needs.append("detector")
        return tuple(needs)

    def _uses_images(self) -> bool:
        return self.template.has_images or (
            self.dps_enabled and self.modality in (Modality.IMAGE, Modality.MULTIMODAL))


@dataclass(frozen=True)
class ConfusionMatrix:
    tp: int = 0
    fp: int = 0
    fn: int = 0
    tn: int = 0
    unparseable: int = 0

    def __post_init__(self) -> None:
        for name in ("tp", "fp", "fn", "tn", "unparseable"):
            if getattr(self, name) < 0:
                raise ValueError(f"{name} must be non-negative")

    @property
    def classified(self) -> int:
        return self.tp + self.fp + self.fn + self.tn

    def to_dict(self) -> dict[str, int]:
        return {"tp": self.tp, "fp": self.fp, "fn": self.fn, "tn": self.tn,
                "unparseable": self.unparseable}


def confusion(predictions: Sequence[Prediction], golds: Sequence[int],
              policy: UnparseablePolicy = UnparseablePolicy.COUNT_INCORRECT,
              ) -> ConfusionMatrix:
    """Standard binary confusion with policy-controlled unparseables.

    COUNT_INCORRECT scores an unparseable generation as the wrong class
    (fn on a positive gold, fp on a negative); EXCLUDE keeps it out of the
    four cells but still counts it.
    """
    if len(predictions) != len(golds):
        raise LengthMismatchError(
            f"{len(predictions)} predictions vs {len(golds)} golds")
    tp = fp = fn = tn = unparseable = 0
    for pred, gold in zip(predictions, golds):
        if gold not in (0, 1):
            raise InvalidParamsError(f"gold labels must be 0 or 1, got {gold!r}")
        if pred.outcome is Outcome.UNPARSEABLE:
            unparseable += 1
            if policy is UnparseablePolicy.EXCLUDE:
                continue
            if gold == 1:
                fn += 1
            else:
                fp += 1
        elif pred.outcome is Outcome.POSITIVE:
            if gold == 1:
                tp += 1
            else:
                fp += 1
        else:
            if gold == 1:
                fn += 1
            else:
                tn += 1
    return ConfusionMatrix(tp=tp, fp=fp, fn=fn, tn=tn, unparseable=unparseable)


@dataclass(frozen=True)
class Metrics:
    precision: float
    recall: float
    f1: float
    accuracy: float
    weighted_f1: float
    degenerate: tuple[str, ...] = ()

    def to_dict(self) -> dict[str, Any]:
        return {
            "precision": self.precision,
            "recall": self.recall,
            "f1": self.f1,
            "accuracy": self.accuracy,
            "weighted_f1": self.weighted_f1,
            "degenerate": list(self.degenerate),
        }


def metrics(cm: ConfusionMatrix) -> Metrics:
    """Precision/recall/F1/accuracy, plus a support-weighted two-class F1.

    Zero denominators yield 0.0 and are flagged in ``degenerate`` instead
    of raising, so degenerate classifiers still report.
    """
    if cm.classified < 1:
        raise EmptyConfusionError("no classified examples in the confusion matrix")
    degenerate: list[str] = []

    precision = _ratio(cm.tp, cm.tp + cm.fp, "precision", degenerate)
    recall = _ratio(cm.tp, cm.tp + cm.fn, "recall", degenerate)
    f1 = _harmonic(precision, recall, "f1", degenerate)
    accuracy = (cm.tp + cm.tn) / cm.classified

    neg_precision = _ratio(cm.tn, cm.tn + cm.fn, None, degenerate)
    neg_recall = _ratio(cm.tn, cm.tn + cm.fp, None, degenerate)
    neg_f1 = _harmonic(neg_precision, neg_recall, None, degenerate)
    support_pos = cm.tp + cm.fn
    support_neg = cm.tn + cm.fp
    weighted_f1 = (f1 * support_pos + neg_f1 * support_neg) / cm.classified

    return Metrics(precision=precision, recall=recall, f1=f1, accuracy=accuracy,
                   weighted_f1=weighted_f1, degenerate=tuple(degenerate))


def _ratio(num: int, denom: int, flag: str | None, degenerate: list[str]) -> float:
    if denom == 0:
        if flag:
            degenerate.append(flag)
        return 0.0
    return num / denom


def _harmonic(p: float, r: float, flag: str | None, degenerate: list[str]) -> float:
    if p + r == 0.0:
        if flag:
            degenerate.append(flag)
        return 0.0
    return 2.0 * p * r / (p + r)


@dataclass(frozen=True)
class QueryTrace:
    """Everything observed for one query; handed to the trace hook."""

    query_id: str
    label_name: str
    gold: int
    order: PromptOrder
    sequence: PromptSequence
    generation: str
    prediction: Prediction


@dataclass
class Report:
    """Aggregated outcome of one experiment configuration."""

    config: ExperimentConfig
    confusion: ConfusionMatrix
    metrics: Metrics
    per_label: dict[str, dict[str, Any]]
    retained_histogram: dict[int, int]
    grounding_misses: int
    errors: list[dict[str, str]]
    n_queries: int

    @property
    def mean_retained(self) -> float:
        total = sum(self.retained_histogram.values())
        if total == 0:
            return 0.0
        return sum(k * v for k, v in self.retained_histogram.items()) / total

    def to_dict(self) -> dict[str, Any]:
        return {
            "config": self.config.to_dict(),
            "n_queries": self.n_queries,
            "confusion": self.confusion.to_dict(),
            "metrics": self.metrics.to_dict(),
            "per_label": self.per_label,
            "retained_shots": {
                "histogram": {str(k): v for k, v in sorted(self.retained_histogram.items())},
                "mean": self.mean_retained,
            },
            "grounding_misses": self.grounding_misses,
            "errors": self.errors,
        }

    def to_json(self) -> str:
        return json.dumps(self.to_dict(), indent=2, sort_keys=True) + "\n"

    def write(self, path: str | Path) -> Path:
        path = Path(path)
        path.parent.mkdir(parents=True, exist_ok=True)
        path.write_text(self.to_json(), encoding="utf-8")
        return path


def run_experiment(
    config: ExperimentConfig,
    dataset: "VqaDataset",
    backends: BackendSet,
    scratch_dir: str | Path | None = None,
    trace_hook: Callable[[QueryTrace], None] | None = None,
    concurrency: int = 1,
) -> Report:
    """Run one configuration over every query in the dataset.

    Deterministic given (config, dataset, mock backends); per-query backend
    failures are recorded in the report rather than aborting the run.
    """
    backends.require(*config.required_capabilities())
    if concurrency < 1:
        raise InvalidParamsError(f"concurrency must be >= 1, got {concurrency}")
    scratch = Path(scratch_dir) if scratch_dir else Path(tempfile.mkdtemp(prefix="nearshot_run_"))
    crops_dir = scratch / "crops"

    runner = _Runner(config, backends, crops_dir)
    work: list[tuple[str, QuerySample, list[tuple[Candidate, EmbeddedSample | None]]]] = []
    for label in dataset.labels:
        pool = dataset.candidates(label)
        queries = dataset.queries(label)
        if not pool or not queries:
            raise InvalidParamsError(
                f"label {label!r} needs both a candidate pool and queries")
        if len(pool) < config.shots:
            raise InvalidParamsError(
                f"label {label!r} has {len(pool)} pool candidates but the run "
                f"needs {config.shots} shots")
        prepared = runner.prepare_pool(label, pool[: config.shots])
        for query in queries:
            work.append((label, query, prepared))

    if concurrency == 1:
        results = [runner.run_query(label, query, prepared)
                   for label, query, prepared in work]
    else:
        with ThreadPoolExecutor(max_workers=concurrency) as pool_exec:
            results = list(pool_exec.map(
                lambda item: runner.run_query(*item), work))

    predictions: list[Prediction] = []
    golds: list[int] = []
    per_label_preds: dict[str, list[tuple[Prediction, int]]] = {}
    histogram: dict[int, int] = {}
    errors: list[dict[str, str]] = []

    for (label, query, _), result in zip(work, results):
        if isinstance(result, _QueryFailure):
            errors.append({"query_id": query.record.id, "stage": result.stage,
                           "error": result.message})
            continue
        trace, retained = result
        predictions.append(trace.prediction)
        golds.append(trace.gold)
        per_label_preds.setdefault(label, []).append((trace.prediction, trace.gold))
        histogram[retained] = histogram.get(retained, 0) + 1
        if trace_hook is not None:
            trace_hook(trace)

    cm = confusion(predictions, golds, config.unparseable_policy)
    if cm.classified:
        run_metrics = metrics(cm)
    else:
        # Every query failed or was excluded; report zeros rather than abort.
        run_metrics = Metrics(0.0, 0.0, 0.0, 0.0, 0.0, degenerate=("empty",))
    per_label: dict[str, dict[str, Any]] = {}
    for label in sorted(per_label_preds):
        pairs = per_label_preds[label]
        label_cm = confusion([p for p, _ in pairs], [g for _, g in pairs],
                             config.unparseable_policy)
        entry: dict[str, Any] = {"confusion": label_cm.to_dict()}
        if label_cm.classified:
            entry["metrics"] = metrics(label_cm).to_dict()
        per_label[label] = entry

    return Report(
        config=config,
        confusion=cm,
        metrics=run_metrics,
        per_label=per_label,
        retained_histogram=histogram,
        grounding_misses=runner.grounding_misses,
        errors=errors,
        n_queries=len(work),
    )


@dataclass
class _QueryFailure:
    stage: str
    message: str


class _Runner:
    """Per-run state: grounding/embedding caches and capability wiring."""

    def __init__(self, config: ExperimentConfig, backends: BackendSet, crops_dir: Path):
        self.config = config
        self.backends = backends
        self.crops_dir = crops_dir
        self.grounding_misses = 0
        self._needs_images = config._uses_images()
        self._needs_text_emb = config.dps_enabled and config.modality in (
            Modality.TEXT, Modality.MULTIMODAL)
        self._needs_image_emb = config.dps_enabled and config.modality in (
            Modality.IMAGE, Modality.MULTIMODAL)
        self._ground_cache: dict[str, str] = {}
        self._emb_cache: dict[str, Any] = {}
        self._text_cache: dict[str, Any] = {}
        self._lock = threading.Lock()

    def prepare_pool(self, label: str, pool: Sequence[Candidate],
                     ) -> list[tuple[Candidate, EmbeddedSample | None]]:
        prepared = []
        for cand in pool:
            image_ref = self._ground(cand.record.image_ref, label)
            record = replace(cand.record, image_ref=image_ref)
            prepared.append((Candidate(record), self._embed(record)))
        return prepared

    def run_query(self, label: str, query: QuerySample,
                  prepared: list[tuple[Candidate, EmbeddedSample | None]],
                  ) -> tuple[QueryTrace, int] | _QueryFailure:
        config = self.config
        try:
            image_ref = self._ground(query.record.image_ref, label)
            grounded_query = QuerySample(replace(query.record, image_ref=image_ref))

            if config.dps_enabled:
                embedded = self._embed(grounded_query.record)
                order = select_shots(prepared, embedded, SelectionConfig(
                    threshold=config.threshold, modality=config.modality))
            else:
                order = self._shuffled_order(prepared, query.record.id)

            sequence = assemble_prompt(
                order, grounded_query,
                grounded_query.record.image_ref if config.template.has_images else None,
                config.template, max_chars=config.max_prompt_chars)
            generation = self.backends.generator.generate(
                GenerateRequest(segments=sequence, seed=config.seed))
            prediction = parse_answer(generation)
        except BackendFailure as exc:
            logger.warning("query %s failed: %s", query.record.id, exc)
            return _QueryFailure(stage=type(exc).__name__, message=str(exc))
        trace = QueryTrace(
            query_id=query.record.id,
            label_name=label,
            gold=query.record.label,
            order=order,
            sequence=sequence,
            generation=generation,
            prediction=prediction,
        )
        return trace, len(order)

    def _shuffled_order(self, prepared: Sequence[tuple[Candidate, EmbeddedSample | None]],
                        query_id: str) -> PromptOrder:
        rng = np.random.default_rng(
            [self.config.seed, zlib.crc32(query_id.encode("utf-8"))])
        perm = rng.permutation(len(prepared))
        shots = [
            ScoredCandidate(candidate=prepared[i][0], embedded=prepared[i][1],
                            score=0.0, original_index=int(i))
            for i in perm
        ]
        return PromptOrder.unranked(shots)

    def _ground(self, image_ref: str, label: str) -> str:
        if not self._needs_images:
            return image_ref
        key = f"{label}|{image_ref}"
        if key not in self._ground_cache:
            result: GroundingResult = ground(
                image_ref, GroundingQuery(label), self.backends.detector,
                vg_enabled=self.config.vg_enabled, out_dir=self.crops_dir)
            with self._lock:
                if result.miss:
                    self.grounding_misses += 1
                self._ground_cache[key] = result.image_ref
        return self._ground_cache[key]

    def _embed(self, record) -> EmbeddedSample | None:
        if not (self._needs_text_emb or self._needs_image_emb):
            return None
        text_emb = None
        image_emb = None
        if self._needs_text_emb:
            text = serialize_features(record.features) or _NO_EHR_TEXT
            if text not in self._text_cache:
                self._text_cache[text] = self.backends.text_embedder.embed_text(text)
            text_emb = self._text_cache[text]
        if self._needs_image_emb:
            ref = record.image_ref
            if ref not in self._emb_cache:
                self._emb_cache[ref] = self.backends.image_embedder.embed_image(ref)
            image_emb = self._emb_cache[ref]
        return EmbeddedSample(image_emb=image_emb, text_emb=text_emb)


GRID_SETTINGS = (
    (False, False),
    (False, True),
    (True, False),
    (True, True),
)


@dataclass
class SweepResult:
    """Reports for each swept setting, in sweep order."""

    axis: str
    settings: list[str]
    reports: list[Report]

    def rows(self) -> list[dict[str, Any]]:
        out = []
        for setting, report in zip(self.settings, self.reports):
            out.append({
                "setting": setting,
                "precision": report.metrics.precision,
                "recall": report.metrics.recall,
                "f1": report.metrics.f1,
                "weighted_f1": report.metrics.weighted_f1,
                "accuracy": report.metrics.accuracy,
                "mean_retained": report.mean_retained,
                "unparseable": report.confusion.unparseable,
            })
        return out


def sweep(
    axis: str,
    values: Sequence[Any] | None,
    base: ExperimentConfig,
    dataset: "VqaDataset",
    backends: BackendSet,
    scratch_dir: str | Path | None = None,
    concurrency: int = 1,
) -> SweepResult:
    """Run one report per setting along an ablation axis, sharing the seed."""
    axis = axis.lower()
    configs: list[tuple[str, ExperimentConfig]] = []
    if axis == "shots":
        shot_values = [int(v) for v in (values or (4, 6, 8, 10, 12))]
        if any(v < 1 for v in shot_values):
            raise InvalidParamsError("shot counts must be >= 1")
        configs = [(f"{v}-shot", replace(base, shots=v)) for v in shot_values]
    elif axis == "threshold":
        th_values = [float(v) for v in (values or (0.5, 0.6, 0.7, 0.8, 0.9))]
        if any(not -1.0 <= v <= 1.0 for v in th_values):
            raise InvalidParamsError("thresholds must lie in [-1, 1]")
        configs = [(f"th={v:g}", replace(base, threshold=v, dps_enabled=True))
                   for v in th_values]
    elif axis == "modality":
        mod_values = [Modality.from_string(str(v))
                      for v in (values or ("text", "image", "multimodal"))]
        configs = [(m.value, replace(base, modality=m, dps_enabled=True))
                   for m in mod_values]
    elif axis == "grid":
        configs = [
            (f"dps={'on' if d else 'off'},vg={'on' if v else 'off'}",
             replace(base, dps_enabled=d, vg_enabled=v))
            for d, v in GRID_SETTINGS
        ]
    else:
        raise InvalidParamsError(
            f"unknown sweep axis {axis!r}; expected shots|threshold|modality|grid")

    reports = [
        run_experiment(cfg, dataset, backends, scratch_dir=scratch_dir,
                       concurrency=concurrency)
        for _, cfg in configs
    ]
    return SweepResult(axis=axis, settings=[s for s, _ in configs], reports=reports)
