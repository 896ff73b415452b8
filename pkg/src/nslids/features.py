"""Zero-ratio feature selection and assembly of the model input vector."""

from __future__ import annotations

import hashlib
import json
from dataclasses import dataclass
from typing import Sequence

import numpy as np

from .dataset import N_NUMERIC, NUMERIC_NAMES, LabeledDataset, RawRecord
from .errors import DataError
from .preprocess import CategoricalVocabulary, OutlierModel

ZERO_RATIO_THRESHOLD = 0.80


def compute_zero_ratios(ds: LabeledDataset) -> np.ndarray:
    if len(ds) == 0:
        raise DataError("cannot compute zero ratios of an empty dataset")
    return np.mean(ds.numeric == 0.0, axis=0)


def select_features(ratios: Sequence[float], threshold: float = ZERO_RATIO_THRESHOLD) -> list[int]:
    """Indices whose zero ratio does not exceed ``threshold`` (original order)."""
    if not 0.0 < threshold < 1.0:
        raise DataError(f"zero-ratio threshold must lie in (0, 1), got {threshold}")
    kept = [i for i, r in enumerate(ratios) if r <= threshold]
    if not kept:
        raise DataError("every numeric feature exceeds the zero-ratio threshold")
    return kept


def fit_scaling(ds: LabeledDataset, kept: Sequence[int]) -> tuple[np.ndarray, np.ndarray]:
    """Per-feature (min, max) over the kept numeric columns."""
    if len(ds) == 0:
        raise DataError("cannot fit scaling on an empty dataset")
    block = ds.numeric[:, list(kept)]
    return block.min(axis=0), block.max(axis=0)


@dataclass(frozen=True)
class FeatureSchema:
    """Everything needed to turn a raw record into a model input vector."""

    outliers: OutlierModel
    vocab: CategoricalVocabulary
    kept_numeric: tuple[int, ...]
    zero_ratio_threshold: float
    mins: np.ndarray
    maxs: np.ndarray

    def __post_init__(self) -> None:
        if len(self.mins) != len(self.kept_numeric) or len(self.maxs) != len(self.kept_numeric):
            raise DataError("scaling parameters do not match the kept features")
        if np.any(self.mins > self.maxs):
            raise DataError("scaling has min > max")

    @property
    def input_dim(self) -> int:
        return len(self.kept_numeric) + self.vocab.width

    @property
    def discarded_numeric(self) -> list[int]:
        return [i for i in range(N_NUMERIC) if i not in self.kept_numeric]

    def kept_names(self) -> list[str]:
        return [NUMERIC_NAMES[i] for i in self.kept_numeric]

    def scale(self, numeric: np.ndarray) -> np.ndarray:
        block = numeric[:, list(self.kept_numeric)]
        span = self.maxs - self.mins
        safe = np.where(span > 0, span, 1.0)
        scaled = np.where(span > 0, (block - self.mins) / safe, 0.0)
        return np.clip(scaled, 0.0, 1.0)

    def encode_dataset(self, ds: LabeledDataset) -> np.ndarray:
        """(n, input_dim) matrix: scaled kept numerics followed by the one-hot block."""
        return np.hstack([
            self.scale(ds.numeric),
            self.vocab.encode_columns(ds.protocol, ds.service, ds.flag),
        ])

    def encode(self, rec: RawRecord) -> np.ndarray:
        numeric = np.asarray(rec.numeric, dtype=np.float64)[None, :]
        return np.hstack([
            self.scale(numeric)[0],
            self.vocab.encode_columns([rec.protocol], [rec.service], [rec.flag])[0],
        ])

    def to_dict(self) -> dict:
        return {
            "outliers": self.outliers.to_dict(),
            "vocab": self.vocab.to_dict(),
            "kept_numeric": list(self.kept_numeric),
            "zero_ratio_threshold": self.zero_ratio_threshold,
            "mins": self.mins.tolist(),
            "maxs": self.maxs.tolist(),
        }

    @classmethod
    def from_dict(cls, d: dict) -> FeatureSchema:
        return cls(
            outliers=OutlierModel.from_dict(d["outliers"]),
            vocab=CategoricalVocabulary.from_dict(d["vocab"]),
            kept_numeric=tuple(int(i) for i in d["kept_numeric"]),
            zero_ratio_threshold=float(d["zero_ratio_threshold"]),
            mins=np.asarray(d["mins"], dtype=np.float64),
            maxs=np.asarray(d["maxs"], dtype=np.float64),
        )

    def digest(self) -> str:
        """Stable hash used to pair encoded caches with model artifacts."""
        blob = json.dumps(self.to_dict(), sort_keys=True, separators=(",", ":"))
        return hashlib.sha256(blob.encode()).hexdigest()


def fit_schema(
    train: LabeledDataset,
    outliers: OutlierModel,
    vocab: CategoricalVocabulary,
    threshold: float = ZERO_RATIO_THRESHOLD,
) -> FeatureSchema:
    """Fit zero-ratio selection and min-max scaling on an outlier-filtered train split."""
    kept = select_features(compute_zero_ratios(train), threshold)
    mins, maxs = fit_scaling(train, kept)
    return FeatureSchema(
        outliers=outliers,
        vocab=vocab,
        kept_numeric=tuple(kept),
        zero_ratio_threshold=threshold,
        mins=mins,
        maxs=maxs,
    )
