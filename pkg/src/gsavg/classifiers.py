"""Average-distance discriminants: AVG, scale-adjusted AVG (SAVG) and gSAVG.

All three compare a test point's mean dissimilarity to each class:

    T(z) = [mean_i h(z, Y_i) - dev2 / 2] - [mean_i h(z, X_i) - dev1 / 2]

with ``h`` the squared Euclidean distance over ``D`` for AVG and SAVG and the
block dissimilarity for gSAVG. AVG drops the within-class deviations. A
positive score assigns class 1; zero and negative scores assign class 2.
"""
from __future__ import annotations

from dataclasses import dataclass

import numpy as np

from .dataset import DataError, Dataset
from .dissim import Blocking, dissimilarity_matrix, pairwise_dissimilarities
from .gamma import GammaSpec, parse_gamma

__all__ = [
    "VARIANTS",
    "TrainedModel",
    "Decision",
    "fit",
    "discriminant",
    "discriminants",
    "classify",
    "predict",
    "misclassification_rate",
]

VARIANTS = ("avg", "savg", "gsavg")


@dataclass(frozen=True, eq=False)
class TrainedModel:
    train: Dataset
    variant: str
    blocking: Blocking
    gamma: GammaSpec
    dev1: float
    dev2: float

    @property
    def dim(self) -> int:
        return self.train.dim

    def class_samples(self, label: int) -> np.ndarray:
        return self.train.class_rows(label)


@dataclass(frozen=True)
class Decision:
    score: float
    label: int
    tie: bool

    @classmethod
    def from_score(cls, score: float) -> "Decision":
        score = float(score)
        return cls(score, 1 if score > 0 else 2, score == 0.0)


def _deviation(samples: np.ndarray, blocking: Blocking, gamma: GammaSpec) -> float:
    return float(pairwise_dissimilarities(samples, blocking, gamma).mean())


def fit(
    train: Dataset,
    variant: str = "gsavg",
    blocking: Blocking | None = None,
    gamma: GammaSpec | str | None = None,
) -> TrainedModel:
    """Fit one of the three classifiers.

    ``blocking`` and ``gamma`` are required for ``gsavg`` and must be left
    out for ``avg`` and ``savg``, which always use singleton blocks with the
    identity transform.
    """
    if variant not in VARIANTS:
        raise ValueError(f"unknown variant {variant!r}; choose from {VARIANTS}")
    train.require_both_classes(2)
    if variant == "gsavg":
        if blocking is None or gamma is None:
            raise ValueError("gsavg needs both a blocking and a gamma")
        gamma = parse_gamma(gamma)
        if blocking.dim != train.dim:
            raise ValueError(f"blocking covers {blocking.dim} coordinates, data has {train.dim}")
    else:
        if blocking is not None or gamma is not None:
            raise ValueError(f"{variant} uses singleton blocks and the identity transform; "
                             "do not pass blocking or gamma")
        blocking = Blocking.singletons(train.dim)
        gamma = GammaSpec.IDENTITY

    if variant == "avg":
        dev1 = dev2 = 0.0
    else:
        dev1 = _deviation(train.class_rows(1), blocking, gamma)
        dev2 = _deviation(train.class_rows(2), blocking, gamma)
    return TrainedModel(train, variant, blocking, gamma, dev1, dev2)


def _scores(model: TrainedModel, z: np.ndarray) -> np.ndarray:
    if z.shape[1] != model.dim:
        raise ValueError(f"test point has dimension {z.shape[1]}, model expects {model.dim}")
    m1 = dissimilarity_matrix(z, model.class_samples(1), model.blocking, model.gamma).mean(axis=1)
    m2 = dissimilarity_matrix(z, model.class_samples(2), model.blocking, model.gamma).mean(axis=1)
    return (m2 - model.dev2 / 2) - (m1 - model.dev1 / 2)


def discriminants(model: TrainedModel, z) -> np.ndarray:
    """Scores for every row of ``z``."""
    z = np.asarray(z, dtype=np.float64)
    if z.ndim != 2:
        raise ValueError("z must be a matrix of row vectors")
    return _scores(model, z)


def discriminant(model: TrainedModel, z) -> float:
    z = np.asarray(z, dtype=np.float64)
    if z.ndim != 1:
        raise ValueError("z must be a vector")
    return float(_scores(model, z[None, :])[0])


def classify(model: TrainedModel, z) -> Decision:
    return Decision.from_score(discriminant(model, z))


def predict(model: TrainedModel, z) -> np.ndarray:
    """Predicted labels for every row of ``z``."""
    return np.where(discriminants(model, z) > 0, 1, 2)


def misclassification_rate(model: TrainedModel, test: Dataset) -> float:
    if test.n == 0:
        raise DataError("empty test set")
    return float(np.mean(predict(model, test.features) != test.labels))


MODEL_FORMAT = "gsavg-model/1"


def model_to_json(model: TrainedModel, extra: dict | None = None) -> dict:
    """JSON-ready model artifact; the training data is embedded so it can be reloaded alone."""
    d = {
        "format": MODEL_FORMAT,
        "variant": model.variant,
        "gamma": model.gamma.value,
        "dim": model.dim,
        "blocks": model.blocking.to_json(),
        "dev1": model.dev1,
        "dev2": model.dev2,
        "train_fingerprint": model.train.fingerprint(),
        "label_map": model.train.label_map,
        "feature_names": list(model.train.feature_names),
        "train": {
            "features": model.train.features.tolist(),
            "labels": model.train.labels.tolist(),
        },
    }
    if extra:
        d.update(extra)
    return d


def model_from_json(d: dict) -> TrainedModel:
    if d.get("format") != MODEL_FORMAT:
        raise ValueError(f"not a model artifact (format={d.get('format')!r})")
    train = Dataset(
        np.asarray(d["train"]["features"], dtype=np.float64).reshape(-1, d["dim"]),
        d["train"]["labels"],
        tuple(d["feature_names"]),
        d.get("label_map", {}),
    )
    if train.fingerprint() != d["train_fingerprint"]:
        raise ValueError("embedded training data does not match its fingerprint")
    return TrainedModel(
        train,
        d["variant"],
        Blocking.from_json(d["blocks"], d["dim"]),
        parse_gamma(d["gamma"]),
        float(d["dev1"]),
        float(d["dev2"]),
    )
