from __future__ import annotations

from collections.abc import Sequence
from dataclasses import dataclass

import numpy as np

from ..errors import LearnerError, SchemaError
from ..optdb import TrainingInstance
from ..profile_ingest import FeatureSchema, FeatureVector


@dataclass(frozen=True)
class Dataset:
    schema: FeatureSchema
    instances: tuple[TrainingInstance, ...]

    def __post_init__(self):
        object.__setattr__(self, "instances", tuple(self.instances))
        for inst in self.instances:
            if inst.features.schema.names != self.schema.names:
                raise SchemaError("training instance does not conform to the dataset schema")

    @classmethod
    def from_arrays(cls, names: Sequence[str], X, y) -> Dataset:
        """Convenience constructor for tests and scripts."""
        schema = FeatureSchema(tuple(names))
        X = np.asarray(X, dtype=float).reshape(len(y), len(schema))
        return cls(schema, tuple(TrainingInstance(FeatureVector(schema, tuple(row)), float(label))
                                 for row, label in zip(X, y)))

    def __len__(self) -> int:
        return len(self.instances)

    @property
    def X(self) -> np.ndarray:
        return np.array([i.features.values for i in self.instances], dtype=float).reshape(len(self), len(self.schema))

    @property
    def y(self) -> np.ndarray:
        return np.array([i.label for i in self.instances], dtype=float)


def require_nonempty(data: Dataset):
    if len(data) == 0:
        raise LearnerError("cannot train on an empty dataset")


def query_array(schema: FeatureSchema, query: FeatureVector) -> np.ndarray:
    if query.schema.names != schema.names:
        raise SchemaError("query features do not match the model's feature schema")
    return query.as_array()
