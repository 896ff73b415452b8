"""Robust outlier rejection and one-hot encoding of the symbolic features."""

from __future__ import annotations

from dataclasses import dataclass, field

import numpy as np

from .dataset import N_NUMERIC, LabeledDataset, RawRecord, Split
from .errors import DataError

MAD_CONSTANT = 1.4826
OUTLIER_K = 10.0


@dataclass(frozen=True)
class OutlierModel:
    """Per-feature median and scaled median absolute deviation.

    A record is an outlier when any feature with a nonzero MAD deviates from
    its median by more than ``k * mad``. Features whose MAD is zero never
    trigger; on NSL-KDD most numeric columns are dominated by zeros and would
    otherwise reject nearly every record.
    """

    median: np.ndarray
    mad: np.ndarray
    c: float = MAD_CONSTANT
    k: float = OUTLIER_K

    def __post_init__(self) -> None:
        if self.median.shape != (N_NUMERIC,) or self.mad.shape != (N_NUMERIC,):
            raise DataError(f"outlier model needs {N_NUMERIC} (median, mad) pairs")
        if np.any(self.mad < 0):
            raise DataError("negative MAD")

    def outlier_mask(self, numeric: np.ndarray) -> np.ndarray:
        """Boolean mask over rows of an (n, 38) block."""
        active = self.mad > 0
        dev = np.abs(numeric[:, active] - self.median[active])
        return np.any(dev > self.k * self.mad[active], axis=1)

    def to_dict(self) -> dict:
        return {
            "median": self.median.tolist(),
            "mad": self.mad.tolist(),
            "c": self.c,
            "k": self.k,
        }

    @classmethod
    def from_dict(cls, d: dict) -> OutlierModel:
        return cls(
            median=np.asarray(d["median"], dtype=np.float64),
            mad=np.asarray(d["mad"], dtype=np.float64),
            c=float(d["c"]),
            k=float(d["k"]),
        )


def fit_outlier_model(
    ds: LabeledDataset, c: float = MAD_CONSTANT, k: float = OUTLIER_K
) -> OutlierModel:
    if len(ds) == 0:
        raise DataError("cannot fit outlier model on an empty dataset")
    if ds.split is not Split.TRAIN:
        raise DataError("outlier model must be fitted on the training split")
    median = np.median(ds.numeric, axis=0)
    mad = c * np.median(np.abs(ds.numeric - median), axis=0)
    return OutlierModel(median=median, mad=mad, c=c, k=k)


def is_outlier(model: OutlierModel, rec: RawRecord) -> bool:
    x = np.asarray(rec.numeric, dtype=np.float64)[None, :]
    return bool(model.outlier_mask(x)[0])


def filter_outliers(model: OutlierModel, ds: LabeledDataset) -> LabeledDataset:
    return ds.subset(~model.outlier_mask(ds.numeric))


@dataclass(frozen=True)
class CategoricalVocabulary:
    protocol: tuple[str, ...]
    service: tuple[str, ...]
    flag: tuple[str, ...]
    _index: tuple[dict, ...] = field(init=False, repr=False, compare=False)

    def __post_init__(self) -> None:
        blocks = tuple({s: i for i, s in enumerate(b)} for b in self.blocks)
        object.__setattr__(self, "_index", blocks)

    @property
    def blocks(self) -> tuple[tuple[str, ...], ...]:
        return (self.protocol, self.service, self.flag)

    @property
    def sizes(self) -> dict[str, int]:
        return {"protocol": len(self.protocol), "service": len(self.service), "flag": len(self.flag)}

    @property
    def width(self) -> int:
        return sum(len(b) for b in self.blocks)

    def encode_columns(self, protocol, service, flag) -> np.ndarray:
        """One-hot encode parallel symbol columns into an (n, width) matrix."""
        n = len(protocol)
        out = np.zeros((n, self.width), dtype=np.float64)
        offset = 0
        for col, index in zip((protocol, service, flag), self._index):
            pos = np.fromiter((index.get(s, -1) for s in col), dtype=np.int64, count=n)
            hit = pos >= 0
            out[np.nonzero(hit)[0], offset + pos[hit]] = 1.0
            offset += len(index)
        return out

    def to_dict(self) -> dict:
        return {"protocol": list(self.protocol), "service": list(self.service), "flag": list(self.flag)}

    @classmethod
    def from_dict(cls, d: dict) -> CategoricalVocabulary:
        return cls(tuple(d["protocol"]), tuple(d["service"]), tuple(d["flag"]))


def fit_vocabulary(ds: LabeledDataset) -> CategoricalVocabulary:
    """Distinct symbols per categorical column, in first-occurrence order."""
    if len(ds) == 0:
        raise DataError("cannot fit vocabulary on an empty dataset")
    if ds.split is not Split.TRAIN:
        raise DataError("vocabulary must be fitted on the training split")
    return CategoricalVocabulary(
        *(tuple(dict.fromkeys(str(s) for s in col)) for col in (ds.protocol, ds.service, ds.flag))
    )


def one_hot(vocab: CategoricalVocabulary, rec: RawRecord) -> np.ndarray:
    """Indicator vector for one record; unseen symbols give an all-zero block."""
    return vocab.encode_columns([rec.protocol], [rec.service], [rec.flag])[0]
