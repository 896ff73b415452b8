"""End-to-end preparation and training driven by a :class:`PipelineConfig`."""

from __future__ import annotations

import dataclasses
import os
from contextlib import contextmanager
from dataclasses import dataclass, field
from pathlib import Path
from typing import Iterator

import numpy as np

from . import dataset as ds_mod
from .artifact import ModelArtifact, config_hash
from .dataset import AttackCategory, LabeledDataset, Split, class_histogram
from .errors import DataError, NslIdsError
from .features import ZERO_RATIO_THRESHOLD, FeatureSchema, compute_zero_ratios, fit_schema
from .models import CLASS_NAMES, MlpClassifier, TrainingLog, train_ae_classifier, train_mlp
from .preprocess import MAD_CONSTANT, OUTLIER_K, filter_outliers, fit_outlier_model, fit_vocabulary
from .scg import TrainConfig

DATA_DIR_ENV = "NSLIDS_DATA_DIR"
CLASS_INDEX = {AttackCategory(name): i for i, name in enumerate(CLASS_NAMES)}
PREPARE_KEYS = ("train_path", "test_path", "k", "c", "zero_ratio_threshold")


def default_data_dir() -> Path:
    return Path(os.environ.get(DATA_DIR_ENV, "data"))


@dataclass
class PipelineConfig:
    train_path: str = ""
    test_path: str = ""
    k: float = OUTLIER_K
    c: float = MAD_CONSTANT
    zero_ratio_threshold: float = ZERO_RATIO_THRESHOLD
    code_sizes: tuple[int, ...] = (50,)
    pretrain_iters: int = 100
    finetune_iters: int = 300
    head_iters: int = 100
    seed: int = 0
    model: str = "ae"
    out_dir: str = "runs"

    def __post_init__(self) -> None:
        if not self.train_path:
            self.train_path = str(default_data_dir() / "KDDTrain+.txt")
        if not self.test_path:
            self.test_path = str(default_data_dir() / "KDDTest+.txt")
        self.code_sizes = tuple(int(m) for m in self.code_sizes)
        self.validate()

    def validate(self) -> None:
        if min(self.pretrain_iters, self.finetune_iters, self.head_iters) < 0:
            raise ValueError("iteration counts must be >= 0")
        if not 0.0 < self.zero_ratio_threshold < 1.0:
            raise ValueError("zero_ratio_threshold must lie in (0, 1)")
        if self.k <= 0:
            raise ValueError("k must be positive")
        if self.c <= 0:
            raise ValueError("c must be positive")
        if self.model not in ("ae", "mlp"):
            raise ValueError(f"model must be 'ae' or 'mlp', got {self.model!r}")
        if self.model == "ae" and (not self.code_sizes or min(self.code_sizes) < 1):
            raise ValueError("code_sizes must be a nonempty list of positive integers")

    def to_dict(self) -> dict:
        d = dataclasses.asdict(self)
        d["code_sizes"] = list(self.code_sizes)
        return d

    def prepare_dict(self) -> dict:
        return {key: getattr(self, key) for key in PREPARE_KEYS}

    @property
    def out(self) -> Path:
        return Path(self.out_dir)


def parse_config_file(path: str | Path) -> dict:
    """Flat ``key = value`` lines; ``#`` starts a comment. Keys may use dashes."""
    fields = {f.name: f for f in dataclasses.fields(PipelineConfig)}
    values: dict = {}
    for lineno, raw in enumerate(Path(path).read_text().splitlines(), start=1):
        line = raw.split("#", 1)[0].strip()
        if not line:
            continue
        if "=" not in line:
            raise ValueError(f"{path}:{lineno}: expected key = value")
        key, value = (s.strip() for s in line.split("=", 1))
        key = key.replace("-", "_").lower()
        if key not in fields:
            raise ValueError(f"{path}:{lineno}: unknown key {key!r}")
        values[key] = coerce_value(key, value)
    return values


def coerce_value(key: str, value: str):
    if key == "code_sizes":
        return tuple(int(v) for v in value.replace(" ", "").strip("[]()").split(",") if v)
    if key in ("k", "c", "zero_ratio_threshold"):
        return float(value)
    if key in ("pretrain_iters", "finetune_iters", "head_iters", "seed"):
        return int(value)
    return value


@contextmanager
def stage(name: str) -> Iterator[None]:
    """Tag pipeline errors raised inside the block with the stage name."""
    try:
        yield
    except NslIdsError as exc:
        if not getattr(exc, "stage", None):
            exc.stage = name  # type: ignore[attr-defined]
        raise
    except OSError as exc:
        err = DataError(str(exc))
        err.stage = name  # type: ignore[attr-defined]
        raise err from exc


def category_indices(ds: LabeledDataset) -> np.ndarray:
    try:
        return np.array([CLASS_INDEX[c] for c in ds.categories], dtype=np.int64)
    except KeyError as exc:
        raise DataError(f"category {exc.args[0]} has no class index") from None


@dataclass
class Prepared:
    schema: FeatureSchema
    X_train: np.ndarray
    y_train: np.ndarray
    X_test: np.ndarray
    y_test: np.ndarray
    summary: dict = field(default_factory=dict)


def _hist(ds: LabeledDataset) -> dict:
    h = class_histogram(ds)
    return {"total": len(ds), **{c.value: n for c, n in h.items()}}


def prepare(config: PipelineConfig) -> Prepared:
    """Parse, filter, fit the feature schema and encode both splits.

    Order: novel test attacks are removed, the MAD outlier model is fitted on
    the training split and applied to both splits, U2R is dropped, and zero
    ratios and scaling are fitted on what remains of the training split. The
    one-hot vocabulary is taken from the complete training file, so rare
    services that happen to be filtered as outliers still get a column.
    """
    summary: dict = {}
    with stage("parse"):
        train = ds_mod.parse_split(config.train_path, Split.TRAIN)
        test = ds_mod.parse_split(config.test_path, Split.TEST)
    summary["train_raw"] = _hist(train)
    summary["test_raw"] = _hist(test)

    with stage("novel-attack filter"):
        test = ds_mod.filter_novel_test_attacks(test)
    summary["test_known"] = _hist(test)

    with stage("vocabulary"):
        vocab = fit_vocabulary(train)

    with stage("outlier removal"):
        outliers = fit_outlier_model(train, c=config.c, k=config.k)
        train = filter_outliers(outliers, train)
        test = filter_outliers(outliers, test)
    summary["train_filtered"] = _hist(train)
    summary["test_filtered"] = _hist(test)

    train = ds_mod.drop_category(train, AttackCategory.U2R)
    test = ds_mod.drop_category(test, AttackCategory.U2R)
    summary["train_final"] = _hist(train)
    summary["test_final"] = _hist(test)

    with stage("feature selection"):
        ratios = compute_zero_ratios(train)
        schema = fit_schema(train, outliers, vocab, config.zero_ratio_threshold)
    summary["zero_ratios"] = {ds_mod.NUMERIC_NAMES[i]: float(r) for i, r in enumerate(ratios)}
    summary["discarded"] = [ds_mod.NUMERIC_NAMES[i] for i in schema.discarded_numeric]
    summary["kept"] = schema.kept_names()
    summary["one_hot_sizes"] = vocab.sizes
    summary["one_hot_width"] = vocab.width
    summary["encoded_dim"] = ds_mod.N_NUMERIC + vocab.width
    summary["input_dim"] = schema.input_dim

    with stage("encode"):
        X_train = schema.encode_dataset(train)
        X_test = schema.encode_dataset(test)
        y_train = category_indices(train)
        y_test = category_indices(test)
    return Prepared(schema, X_train, y_train, X_test, y_test, summary)


def format_summary(summary: dict) -> str:
    cols = ["total"] + [c.value for c in ds_mod.CATEGORIES]
    rows = [
        ("train (raw)", "train_raw"), ("test (raw)", "test_raw"),
        ("test (known attacks)", "test_known"),
        ("train (outliers removed)", "train_filtered"), ("test (outliers removed)", "test_filtered"),
        ("train (final, no U2R)", "train_final"), ("test (final, no U2R)", "test_final"),
    ]
    lines = [f"{'split':<26}" + "".join(f"{c:>9}" for c in cols)]
    for label, key in rows:
        if key in summary:
            lines.append(f"{label:<26}" + "".join(f"{summary[key][c]:>9}" for c in cols))
    lines.append("")
    sizes = summary["one_hot_sizes"]
    lines.append(f"one-hot width: {summary['one_hot_width']} "
                 f"(protocol {sizes['protocol']}, service {sizes['service']}, flag {sizes['flag']})")
    lines.append(f"encoded dims: {summary['encoded_dim']}")
    lines.append(f"discarded numeric features ({len(summary['discarded'])}): "
                 + ", ".join(summary["discarded"]))
    lines.append(f"selected input dims: {summary['input_dim']}")
    return "\n".join(lines)


def train_model(config: PipelineConfig, X: np.ndarray, y: np.ndarray,
                schema: FeatureSchema) -> tuple[ModelArtifact, TrainingLog]:
    if config.model == "ae":
        clf, log = train_ae_classifier(
            X, y, config.code_sizes, seed=config.seed,
            pretrain_iters=config.pretrain_iters,
            head_iters=config.head_iters,
            finetune_iters=config.finetune_iters,
        )
    else:
        log = TrainingLog()
        clf_mlp: MlpClassifier
        clf_mlp, log.mlp = train_mlp(
            X, y, TrainConfig(max_iterations=config.finetune_iters, seed=config.seed,
                              objective="crossentropy"),
            hidden=config.code_sizes[0] if config.code_sizes else 50,
        )
        clf = clf_mlp
    artifact = ModelArtifact(clf, schema, config.to_dict(), log.summary())
    return artifact, log


def run_config_hash(config: PipelineConfig) -> str:
    return config_hash(config.to_dict())
