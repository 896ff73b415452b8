"""Autoencoder-based intrusion detection on NSL-KDD style connection records."""

from .dataset import AttackCategory, LabeledDataset, RawRecord, Split, parse_split
from .errors import DataError, NslIdsError, ParseError, TrainingError
from .evaluation import EvalReport, evaluate, render_report
from .features import FeatureSchema
from .models import AeClassifier, MlpClassifier, train_ae_classifier, train_mlp
from .neuralnet import Activation, DenseLayer, LossKind, Network
from .scg import TrainConfig, scg_minimize

__all__ = [
    "Activation", "AeClassifier", "AttackCategory", "DataError", "DenseLayer",
    "EvalReport", "FeatureSchema", "LabeledDataset", "LossKind", "MlpClassifier",
    "Network", "NslIdsError", "ParseError", "RawRecord", "Split", "TrainConfig",
    "TrainingError", "evaluate", "parse_split", "render_report", "scg_minimize",
    "train_ae_classifier", "train_mlp",
]
