"""NSL-KDD file parsing and split-level filtering.

Records are stored column-wise (a float matrix for the 38 numeric features and
string arrays for the symbolic columns) so that the downstream statistics run
vectorised over ~126k rows. Individual :class:`RawRecord` objects are
materialised on demand.
"""

from __future__ import annotations

import enum
import math
from dataclasses import dataclass
from pathlib import Path
from typing import Iterator, Sequence

import numpy as np

from .errors import DataError, ParseError

FEATURE_NAMES = (
    "duration", "protocol_type", "service", "flag", "src_bytes", "dst_bytes",
    "land", "wrong_fragment", "urgent", "hot", "num_failed_logins", "logged_in",
    "num_compromised", "root_shell", "su_attempted", "num_root",
    "num_file_creations", "num_shells", "num_access_files", "num_outbound_cmds",
    "is_host_login", "is_guest_login", "count", "srv_count", "serror_rate",
    "srv_serror_rate", "rerror_rate", "srv_rerror_rate", "same_srv_rate",
    "diff_srv_rate", "srv_diff_host_rate", "dst_host_count",
    "dst_host_srv_count", "dst_host_same_srv_rate", "dst_host_diff_srv_rate",
    "dst_host_same_src_port_rate", "dst_host_srv_diff_host_rate",
    "dst_host_serror_rate", "dst_host_srv_serror_rate", "dst_host_rerror_rate",
    "dst_host_srv_rerror_rate",
)
CATEGORICAL_COLUMNS = (1, 2, 3)  # protocol_type, service, flag
NUMERIC_COLUMNS = tuple(i for i in range(41) if i not in CATEGORICAL_COLUMNS)
NUMERIC_NAMES = tuple(FEATURE_NAMES[i] for i in NUMERIC_COLUMNS)
N_FEATURES = 41
N_NUMERIC = 38


class Split(str, enum.Enum):
    TRAIN = "train"
    TEST = "test"


class AttackCategory(str, enum.Enum):
    """Attack category of a record.

    ``UNKNOWN`` is not a real category: it flags test-only attack names that
    are not part of the taxonomy, so they can be dropped by
    :func:`filter_novel_test_attacks`.
    """

    NORMAL = "Normal"
    DOS = "DoS"
    R2L = "R2L"
    U2R = "U2R"
    PROBE = "Probe"
    UNKNOWN = "Unknown"


CATEGORIES = (
    AttackCategory.NORMAL,
    AttackCategory.DOS,
    AttackCategory.PROBE,
    AttackCategory.R2L,
    AttackCategory.U2R,
)

TAXONOMY: dict[str, AttackCategory] = {
    "normal": AttackCategory.NORMAL,
    **dict.fromkeys(
        ["back", "land", "neptune", "pod", "smurf", "teardrop"], AttackCategory.DOS
    ),
    **dict.fromkeys(
        ["ftp_write", "guess_passwd", "imap", "multihop", "phf", "spy",
         "warezclient", "warezmaster"],
        AttackCategory.R2L,
    ),
    **dict.fromkeys(
        ["buffer_overflow", "loadmodule", "perl", "rootkit"], AttackCategory.U2R
    ),
    **dict.fromkeys(["ipsweep", "nmap", "portsweep", "satan"], AttackCategory.PROBE),
}


def categorize(label: str) -> AttackCategory:
    return TAXONOMY.get(label.strip().lower(), AttackCategory.UNKNOWN)


@dataclass(frozen=True)
class RawRecord:
    """One connection record: 38 numeric values plus the 3 symbolic features."""

    numeric: tuple[float, ...]
    protocol: str
    service: str
    flag: str
    attack_label: str | None = None
    difficulty: int | None = None

    def features(self) -> list:
        """The 41 feature values in canonical column order."""
        out: list = list(self.numeric)
        for col, sym in zip(CATEGORICAL_COLUMNS, (self.protocol, self.service, self.flag)):
            out.insert(col, sym)
        return out


@dataclass(frozen=True, eq=False)
class LabeledDataset:
    numeric: np.ndarray  # (n, 38) float64
    protocol: np.ndarray  # (n,) str
    service: np.ndarray
    flag: np.ndarray
    labels: np.ndarray  # raw attack label symbols
    categories: np.ndarray  # (n,) object array of AttackCategory
    split: Split
    difficulty: np.ndarray | None = None

    def __post_init__(self) -> None:
        n = self.numeric.shape[0]
        if self.numeric.ndim != 2 or self.numeric.shape[1] != N_NUMERIC:
            raise DataError(f"numeric block must be (n, {N_NUMERIC}), got {self.numeric.shape}")
        for name in ("protocol", "service", "flag", "labels", "categories"):
            if len(getattr(self, name)) != n:
                raise DataError(f"column {name!r} has length {len(getattr(self, name))}, expected {n}")
        for arr in (self.numeric, self.protocol, self.service, self.flag,
                    self.labels, self.categories):
            arr.flags.writeable = False

    def __len__(self) -> int:
        return self.numeric.shape[0]

    def __getitem__(self, i: int) -> RawRecord:
        return RawRecord(
            numeric=tuple(float(v) for v in self.numeric[i]),
            protocol=str(self.protocol[i]),
            service=str(self.service[i]),
            flag=str(self.flag[i]),
            attack_label=str(self.labels[i]),
            difficulty=None if self.difficulty is None else int(self.difficulty[i]),
        )

    def __iter__(self) -> Iterator[RawRecord]:
        return (self[i] for i in range(len(self)))

    @property
    def records(self) -> list[RawRecord]:
        return list(self)

    def subset(self, mask: np.ndarray) -> LabeledDataset:
        """Rows where ``mask`` is true (boolean mask or index array)."""
        return LabeledDataset(
            numeric=self.numeric[mask],
            protocol=self.protocol[mask],
            service=self.service[mask],
            flag=self.flag[mask],
            labels=self.labels[mask],
            categories=self.categories[mask],
            split=self.split,
            difficulty=None if self.difficulty is None else self.difficulty[mask],
        )

    @classmethod
    def from_records(cls, records: Sequence[RawRecord], split: Split) -> LabeledDataset:
        labels = [r.attack_label or "" for r in records]
        numeric = np.array([r.numeric for r in records], dtype=np.float64).reshape(-1, N_NUMERIC)
        return cls(
            numeric=numeric,
            protocol=np.array([r.protocol for r in records], dtype=object),
            service=np.array([r.service for r in records], dtype=object),
            flag=np.array([r.flag for r in records], dtype=object),
            labels=np.array(labels, dtype=object),
            categories=np.array([categorize(lab) for lab in labels], dtype=object),
            split=split,
            difficulty=np.array([r.difficulty or 0 for r in records], dtype=np.int64),
        )


def parse_line(line: str, lineno: int = 0, require_label: bool = True) -> RawRecord:
    """Parse one comma-separated NSL-KDD line.

    With ``require_label`` false, 41-field (features only) and 42-field
    (features + label) lines are accepted as well as the full 43-field form.
    """
    fields = [f.strip() for f in line.strip().split(",")]
    allowed = (43,) if require_label else (41, 42, 43)
    if len(fields) not in allowed:
        raise ParseError(f"expected {' or '.join(map(str, allowed))} fields, got {len(fields)}", lineno)
    numeric = []
    for col in NUMERIC_COLUMNS:
        try:
            v = float(fields[col])
        except ValueError:
            raise ParseError(
                f"non-numeric value {fields[col]!r} in column {col + 1} ({FEATURE_NAMES[col]})",
                lineno,
            ) from None
        if not math.isfinite(v):
            raise ParseError(f"non-finite value in column {col + 1} ({FEATURE_NAMES[col]})", lineno)
        numeric.append(v)
    label = fields[41] if len(fields) > 41 else None
    difficulty = None
    if len(fields) > 42:
        try:
            difficulty = int(float(fields[42]))
        except ValueError:
            raise ParseError(f"non-numeric difficulty {fields[42]!r}", lineno) from None
    return RawRecord(
        numeric=tuple(numeric),
        protocol=fields[1],
        service=fields[2],
        flag=fields[3],
        attack_label=None if label is None else label.lower(),
        difficulty=difficulty,
    )


def parse_split(path: str | Path, split: Split | str) -> LabeledDataset:
    """Read a KDDTrain+/KDDTest+ style file into a :class:`LabeledDataset`.

    Blank lines are skipped. Labels outside the taxonomy are kept and flagged
    ``AttackCategory.UNKNOWN``.

    Raises:
        ParseError: on a malformed line (message carries the 1-based line number).
        DataError: if the file holds no records.
    """
    split = Split(split)
    path = Path(path)
    records = []
    with path.open("r", encoding="utf-8") as fh:
        for lineno, line in enumerate(fh, start=1):
            if not line.strip():
                continue
            records.append(parse_line(line, lineno))
    if not records:
        raise DataError(f"{path}: no records")
    return LabeledDataset.from_records(records, split)


def filter_novel_test_attacks(ds: LabeledDataset) -> LabeledDataset:
    if ds.split is not Split.TEST:
        raise DataError("novel-attack filtering applies to the test split only")
    keep = np.array([c is not AttackCategory.UNKNOWN for c in ds.categories], dtype=bool)
    return ds.subset(keep)


def drop_category(ds: LabeledDataset, cat: AttackCategory) -> LabeledDataset:
    keep = np.array([c is not cat for c in ds.categories], dtype=bool)
    return ds.subset(keep)


def class_histogram(ds: LabeledDataset) -> dict[AttackCategory, int]:
    hist = dict.fromkeys(CATEGORIES, 0)
    for c in ds.categories:
        hist[c] = hist.get(c, 0) + 1
    return hist
