"""Instance-based (IBK-style) k-nearest-neighbor speedup regression."""

from __future__ import annotations

from dataclasses import dataclass, field

import numpy as np

from ..errors import LearnerError
from ..profile_ingest import FeatureSchema, FeatureVector
from .dataset import Dataset, query_array, require_nonempty

DEFAULT_K = 10


@dataclass(frozen=True)
class KnnModel:
    """All training instances plus the per-feature min/max used for scaling.

    Instances are kept in a canonical order (lexicographic on features, then
    label) so that the lower-index tie rule depends only on the multiset of
    training instances, not on the order they were supplied in.
    """

    k: int
    schema: FeatureSchema
    X: tuple[tuple[float, ...], ...]
    y: tuple[float, ...]
    mins: tuple[float, ...]
    maxs: tuple[float, ...]
    _Xs: np.ndarray = field(init=False, repr=False, compare=False)
    _y: np.ndarray = field(init=False, repr=False, compare=False)

    def __post_init__(self):
        if self.k < 1:
            raise LearnerError(f"k must be >= 1, got {self.k}")
        if len(self.X) != len(self.y) or not self.y:
            raise LearnerError("KNN model needs a non-empty, aligned instance store")
        if any(lo > hi for lo, hi in zip(self.mins, self.maxs)):
            raise LearnerError("scaling requires min <= max per feature")
        d = len(self.schema)
        X = np.asarray(self.X, dtype=float).reshape(len(self.y), d)
        object.__setattr__(self, "_Xs", self.scale(X))
        object.__setattr__(self, "_y", np.asarray(self.y, dtype=float))

    def scale(self, X: np.ndarray) -> np.ndarray:
        lo = np.asarray(self.mins, dtype=float)
        span = np.asarray(self.maxs, dtype=float) - lo
        safe = np.where(span > 0, span, 1.0)
        return np.where(span > 0, (X - lo) / safe, 0.0)

    def predict_array(self, X: np.ndarray) -> np.ndarray:
        Q = self.scale(np.atleast_2d(np.asarray(X, dtype=float)))
        d2 = ((Q[:, None, :] - self._Xs[None, :, :]) ** 2).sum(axis=2)
        m = min(self.k, len(self._y))
        order = np.argsort(d2, axis=1, kind="stable")[:, :m]
        return self._y[order].mean(axis=1)


def knn_train(data: Dataset, k: int = DEFAULT_K) -> KnnModel:
    require_nonempty(data)
    if k < 1:
        raise LearnerError(f"k must be >= 1, got {k}")
    rows = sorted((inst.features.values, inst.label) for inst in data.instances)
    X = np.array([r[0] for r in rows], dtype=float).reshape(len(rows), len(data.schema))
    return KnnModel(
        k=k,
        schema=data.schema,
        X=tuple(r[0] for r in rows),
        y=tuple(r[1] for r in rows),
        mins=tuple(X.min(axis=0).tolist()),
        maxs=tuple(X.max(axis=0).tolist()),
    )


def knn_predict(model: KnnModel, query: FeatureVector) -> float:
    """Mean label of the k nearest stored instances (Euclidean, min-max scaled)."""
    return float(model.predict_array(query_array(model.schema, query))[0])
