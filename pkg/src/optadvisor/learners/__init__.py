from .dataset import Dataset
from .knn import DEFAULT_K, KnnModel, knn_predict, knn_train
from .m5 import M5Model, coefficient_confinement_holds, m5_build, m5_predict, population_sd, sdr
from .serialize import (
    LEARNER_KINDS,
    ModelBundle,
    TrainedModel,
    deserialize_bundle,
    deserialize_model,
    serialize_bundle,
    serialize_model,
    train_model,
)

__all__ = [
    "DEFAULT_K", "Dataset", "KnnModel", "LEARNER_KINDS", "M5Model", "ModelBundle", "TrainedModel",
    "coefficient_confinement_holds", "deserialize_bundle", "deserialize_model", "knn_predict",
    "knn_train", "m5_build", "m5_predict", "population_sd", "sdr", "serialize_bundle",
    "serialize_model", "train_model",
]
