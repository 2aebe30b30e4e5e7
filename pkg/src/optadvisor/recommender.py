"""Tiers 2 and 3: per-optimization speedup prediction, ranking and reporting."""

from __future__ import annotations

import json
import logging
import math
from collections.abc import Mapping
from dataclasses import dataclass

from .errors import AdvisorError, SchemaError
from .learners import DEFAULT_K, Dataset, ModelBundle, TrainedModel, train_model
from .optdb import OptimizationDB, build_training_set
from .profile_ingest import FeatureSchema, FeatureVector, SampleRecord, normalize

log = logging.getLogger(__name__)

DEFAULT_THRESHOLD = 1.05
DEFAULT_MAX_COUNT = 3
SPEEDUP_FLOOR = 0.01
NO_RECOMMENDATION = "No optimization is predicted to exceed the threshold"


@dataclass(frozen=True)
class ReportConfig:
    threshold: float = DEFAULT_THRESHOLD
    max_count: int = DEFAULT_MAX_COUNT
    include_explanations: bool = False
    include_examples: bool = False

    def __post_init__(self):
        if self.max_count < 1:
            raise ValueError("max_count must be a positive integer")
        if math.isnan(self.threshold):
            raise ValueError("threshold must be a number")


@dataclass(frozen=True)
class Recommendation:
    optimization_id: str
    predicted_speedup: float
    rank: int
    name: str = ""
    clamped: bool = False
    description: str | None = None
    example: str | None = None


def train_all(db: OptimizationDB, schema: FeatureSchema | None = None, learner_kind: str = "ibk",
              k: int = DEFAULT_K) -> ModelBundle:
    """Train one model per entry that has samples; sampleless entries are skipped."""
    if schema is None and any(e.trainable for e in db):
        schema = db.schema()
    models: dict[str, TrainedModel] = {}
    skipped = []
    for entry in db:
        if not entry.trainable:
            log.info("skipping %s: no before/after samples", entry.id)
            skipped.append(entry.id)
            continue
        try:
            data = Dataset(schema, tuple(build_training_set(entry, schema)))
            models[entry.id] = train_model(data, learner_kind, entry.id, k)
        except AdvisorError as exc:
            raise type(exc)(f"[{entry.id}] {exc}") from exc
    entries = {e.id: {"name": e.name, "description": e.description, "example": e.example} for e in db}
    return ModelBundle(learner_kind, models, entries, skipped)


def profile_vector(record: SampleRecord, model: TrainedModel) -> FeatureVector:
    return normalize(record, model.schema)


def predict_all(models: Mapping[str, TrainedModel], user_profile: FeatureVector | SampleRecord) -> dict[str, float]:
    """Predicted speedup of every optimization for one user profile.

    A raw ``SampleRecord`` is normalized under each model's own schema; a
    ready ``FeatureVector`` must match every model's schema.
    """
    out = {}
    for opt_id in sorted(models):
        model = models[opt_id]
        try:
            query = normalize(user_profile, model.schema) if isinstance(user_profile, SampleRecord) else user_profile
            value = model.predict(query)
        except SchemaError as exc:
            raise type(exc)(f"model {opt_id!r}: {exc}") from exc
        if not math.isfinite(value):
            raise AdvisorError(f"model {opt_id!r} produced a non-finite prediction")
        out[opt_id] = value
    return out


def rank_and_filter(predictions: Mapping[str, float], config: ReportConfig = ReportConfig(),
                    entries: Mapping[str, Mapping[str, str]] | None = None) -> list[Recommendation]:
    entries = entries or {}
    scored = []
    for opt_id, value in predictions.items():
        clamped = value <= 0
        scored.append((max(value, SPEEDUP_FLOOR) if clamped else value, opt_id, clamped))
    scored.sort(key=lambda t: (-t[0], t[1]))
    kept = [t for t in scored if t[0] >= config.threshold][: config.max_count]
    recs = []
    for rank, (value, opt_id, clamped) in enumerate(kept, start=1):
        info = entries.get(opt_id, {})
        recs.append(Recommendation(
            optimization_id=opt_id,
            predicted_speedup=value,
            rank=rank,
            name=info.get("name", opt_id),
            clamped=clamped,
            description=info.get("description") if config.include_explanations else None,
            example=info.get("example") if config.include_examples else None,
        ))
    return recs


def _percent_gain(speedup: float) -> str:
    return f"{(speedup - 1.0) * 100:+.0f}%"


def report_dict(recs: list[Recommendation], config: ReportConfig) -> dict:
    items = []
    for r in recs:
        item = {"rank": r.rank, "id": r.optimization_id, "name": r.name,
                "predicted_speedup": r.predicted_speedup, "clamped": r.clamped}
        if config.include_explanations and r.description is not None:
            item["description"] = r.description
        if config.include_examples and r.example is not None:
            item["example"] = r.example
        items.append(item)
    return {"threshold": config.threshold, "max_count": config.max_count, "recommendations": items}


def render_text(recs: list[Recommendation], config: ReportConfig) -> str:
    if not recs:
        return f"{NO_RECOMMENDATION} ({config.threshold:g}x).\n"
    lines = [f"Recommended optimizations (threshold {config.threshold:g}x, top {config.max_count}):"]
    for r in recs:
        flag = " [clamped]" if r.clamped else ""
        label = r.optimization_id if r.name in ("", r.optimization_id) else f"{r.optimization_id} ({r.name})"
        lines.append(f"  {r.rank}. {label}: predicted speedup {r.predicted_speedup:.3f}x "
                     f"({_percent_gain(r.predicted_speedup)}){flag}")
        if config.include_explanations and r.description:
            lines.append(f"     {r.description}")
        if config.include_examples and r.example:
            lines.extend(f"     | {ln}" for ln in r.example.splitlines())
    return "\n".join(lines) + "\n"


def render_report(recs: list[Recommendation], config: ReportConfig) -> tuple[str, str]:
    """Human-readable text and the JSON report, as a pair."""
    return render_text(recs, config), json.dumps(report_dict(recs, config), indent=2, sort_keys=True) + "\n"
