"""JSON model files and model bundles.

Floats are written with ``repr`` precision by the json module, so a round
trip restores every stored value bit for bit.
"""

from __future__ import annotations

import json
from collections.abc import Mapping
from dataclasses import dataclass, field

import numpy as np

from ..errors import LearnerError, ModelFormatError
from ..profile_ingest import FeatureSchema, FeatureVector
from .dataset import Dataset, query_array
from .knn import DEFAULT_K, KnnModel, knn_train
from .m5 import LinearModel, M5Model, Node, m5_build

FORMAT_VERSION = 1
LEARNER_KINDS = ("ibk", "m5p")


@dataclass(frozen=True)
class TrainedModel:
    learner_kind: str
    optimization_id: str
    schema: FeatureSchema
    payload: KnnModel | M5Model

    def predict(self, query: FeatureVector) -> float:
        return float(self.payload.predict_array(query_array(self.schema, query))[0])

    def predict_array(self, X: np.ndarray) -> np.ndarray:
        return self.payload.predict_array(X)


def train_model(data: Dataset, learner_kind: str, optimization_id: str, k: int = DEFAULT_K) -> TrainedModel:
    if learner_kind == "ibk":
        payload = knn_train(data, k)
    elif learner_kind == "m5p":
        payload = m5_build(data)
    else:
        raise LearnerError(f"unknown learner {learner_kind!r}; expected one of {LEARNER_KINDS}")
    return TrainedModel(learner_kind, optimization_id, data.schema, payload)


def _node_to_dict(node: Node) -> dict:
    d = {
        "n": node.n,
        "allowed": list(node.allowed),
        "model": {"intercept": node.model.intercept, "coefficients": node.model.coefficients},
    }
    if not node.is_leaf:
        d.update(feature=node.feature, threshold=node.threshold,
                 left=_node_to_dict(node.left), right=_node_to_dict(node.right))
    return d


def _node_from_dict(d: Mapping) -> Node:
    model = LinearModel(float(d["model"]["intercept"]),
                        {str(k): float(v) for k, v in d["model"]["coefficients"].items()})
    node = Node(model=model, n=int(d["n"]), allowed=tuple(d["allowed"]))
    if "feature" in d:
        node.feature = str(d["feature"])
        node.threshold = float(d["threshold"])
        node.left = _node_from_dict(d["left"])
        node.right = _node_from_dict(d["right"])
    return node


def model_to_dict(model: TrainedModel) -> dict:
    p = model.payload
    if isinstance(p, KnnModel):
        payload = {"k": p.k, "X": [list(r) for r in p.X], "y": list(p.y),
                   "mins": list(p.mins), "maxs": list(p.maxs)}
    else:
        payload = {"smoothing_k": p.smoothing_k, "root": _node_to_dict(p.root)}
    return {
        "format_version": FORMAT_VERSION,
        "learner_kind": model.learner_kind,
        "optimization_id": model.optimization_id,
        "schema": list(model.schema.names),
        "payload": payload,
    }


def model_from_dict(doc: Mapping) -> TrainedModel:
    if not isinstance(doc, Mapping):
        raise ModelFormatError("model document must be a JSON object")
    version = doc.get("format_version")
    if version != FORMAT_VERSION:
        raise ModelFormatError(f"unsupported model format_version {version!r} (expected {FORMAT_VERSION})")
    try:
        schema = FeatureSchema(tuple(doc["schema"]))
        kind = doc["learner_kind"]
        p = doc["payload"]
        if kind == "ibk":
            payload = KnnModel(k=int(p["k"]), schema=schema, X=tuple(tuple(map(float, r)) for r in p["X"]),
                               y=tuple(map(float, p["y"])), mins=tuple(map(float, p["mins"])),
                               maxs=tuple(map(float, p["maxs"])))
        elif kind == "m5p":
            payload = M5Model(schema, _node_from_dict(p["root"]), float(p["smoothing_k"]))
        else:
            raise ModelFormatError(f"unknown learner_kind {kind!r}")
        return TrainedModel(kind, str(doc["optimization_id"]), schema, payload)
    except ModelFormatError:
        raise
    except (KeyError, TypeError, ValueError, LearnerError) as exc:
        raise ModelFormatError(f"corrupt model payload: {exc}") from None


def _dumps(doc) -> bytes:
    return (json.dumps(doc, sort_keys=True, indent=1, allow_nan=False) + "\n").encode("utf-8")


def _loads(data: bytes):
    try:
        return json.loads(data.decode("utf-8"))
    except (UnicodeDecodeError, json.JSONDecodeError) as exc:
        raise ModelFormatError(f"corrupt model stream: {exc}") from None


def serialize_model(model: TrainedModel) -> bytes:
    return _dumps(model_to_dict(model))


def deserialize_model(data: bytes) -> TrainedModel:
    return model_from_dict(_loads(data))


@dataclass
class ModelBundle:
    """All per-optimization models of one training run, plus entry prose for reports."""

    learner_kind: str
    models: dict[str, TrainedModel]
    entries: dict[str, dict[str, str]] = field(default_factory=dict)
    skipped: list[str] = field(default_factory=list)


def serialize_bundle(bundle: ModelBundle) -> bytes:
    return _dumps({
        "format_version": FORMAT_VERSION,
        "kind": "bundle",
        "learner_kind": bundle.learner_kind,
        "models": [model_to_dict(bundle.models[k]) for k in sorted(bundle.models)],
        "entries": bundle.entries,
        "skipped": sorted(bundle.skipped),
    })


def deserialize_bundle(data: bytes) -> ModelBundle:
    doc = _loads(data)
    if not isinstance(doc, dict) or doc.get("kind") != "bundle":
        raise ModelFormatError("not a model bundle")
    if doc.get("format_version") != FORMAT_VERSION:
        raise ModelFormatError(f"unsupported bundle format_version {doc.get('format_version')!r}")
    try:
        models = [model_from_dict(m) for m in doc["models"]]
        return ModelBundle(str(doc["learner_kind"]), {m.optimization_id: m for m in models},
                           {str(k): dict(v) for k, v in doc.get("entries", {}).items()},
                           list(doc.get("skipped", [])))
    except (KeyError, TypeError, ValueError) as exc:
        raise ModelFormatError(f"corrupt bundle: {exc}") from None
