"""Autoencoder and MLP classifiers trained with scaled conjugate gradient.

The AE classifier is built in three stages: each autoencoder tier is
pretrained on its own (tied decoder, reconstruction MSE), a softmax head is
fitted on the frozen codes, and finally encoders and head are fine-tuned
jointly on cross-entropy.
"""

from __future__ import annotations

import dataclasses
import logging
import warnings
from dataclasses import dataclass, field
from typing import Sequence

import numpy as np

from .errors import DimensionError, TrainingError
from .neuralnet import Activation, DenseLayer, LossKind, Network, satlin
from .scg import ScgResult, TrainConfig, scg_minimize

logger = logging.getLogger(__name__)

CLASS_NAMES = ("Normal", "DoS", "Probe", "R2L")
N_CLASSES = len(CLASS_NAMES)


def one_hot_targets(y: np.ndarray, n_classes: int = N_CLASSES) -> np.ndarray:
    y = np.asarray(y, dtype=np.int64)
    if y.size and (y.min() < 0 or y.max() >= n_classes):
        raise DimensionError(f"labels must lie in [0, {n_classes})")
    T = np.zeros((y.size, n_classes))
    T[np.arange(y.size), y] = 1.0
    return T


def _fit(net: Network, X: np.ndarray, T: np.ndarray, cfg: TrainConfig, stage: str) -> ScgResult:
    fun, grad = net.objective(X, T)
    try:
        result = scg_minimize(fun, grad, net.get_params(), cfg)
    except TrainingError as exc:
        raise TrainingError(f"{stage}: {exc}") from exc
    net.set_params(result.theta)
    logger.info("%s: %d iterations, loss %.6g -> %.6g (%s)", stage, result.iterations,
                result.trace[0], result.final_loss, result.stop_reason)
    return result


@dataclass
class AutoencoderTier:
    """One autoencoder level with decoder weights tied to the encoder's."""

    weights: np.ndarray  # (n, m)
    encoder_bias: np.ndarray  # (m,)
    decoder_bias: np.ndarray  # (n,)

    @property
    def n_in(self) -> int:
        return self.weights.shape[0]

    @property
    def n_code(self) -> int:
        return self.weights.shape[1]

    def network(self) -> Network:
        return Network(
            [
                DenseLayer(self.weights, self.encoder_bias, Activation.SATLIN),
                DenseLayer(None, self.decoder_bias, Activation.LINEAR, tied_to=0),
            ],
            LossKind.MSE,
        )

    @classmethod
    def from_network(cls, net: Network) -> AutoencoderTier:
        enc, dec = net.layers
        return cls(enc.weights.copy(), enc.bias.copy(), dec.bias.copy())

    def encoder_layer(self) -> DenseLayer:
        return DenseLayer(self.weights.copy(), self.encoder_bias.copy(), Activation.SATLIN)

    def encode(self, X: np.ndarray) -> np.ndarray:
        return satlin(X @ self.weights + self.encoder_bias)

    def reconstruct(self, X: np.ndarray) -> np.ndarray:
        return self.encode(X) @ self.weights.T + self.decoder_bias


def pretrain_tier(inputs: np.ndarray, code_size: int, cfg: TrainConfig) -> tuple[AutoencoderTier, ScgResult]:
    """Train one tier to reconstruct ``inputs``; returns the tier and its SCG run."""
    inputs = np.asarray(inputs, dtype=np.float64)
    if inputs.ndim != 2 or inputs.shape[0] == 0:
        raise DimensionError("pretraining needs a nonempty (n, d) input matrix")
    if code_size < 1:
        raise DimensionError("code size must be positive")
    n = inputs.shape[1]
    rng = np.random.default_rng(cfg.seed)
    tier = AutoencoderTier(
        weights=DenseLayer.create(n, code_size, Activation.SATLIN, rng).weights,
        encoder_bias=np.zeros(code_size),
        decoder_bias=np.zeros(n),
    )
    net = tier.network()
    result = _fit(net, inputs, inputs, cfg, f"pretrain {n}->{code_size}")
    return AutoencoderTier.from_network(net), result


def greedy_pretrain(
    inputs: np.ndarray, code_sizes: Sequence[int], cfg: TrainConfig
) -> tuple[list[AutoencoderTier], list[ScgResult]]:
    """Stack tiers; tier t is trained on the codes of the frozen tiers before it.

    Tier t uses seed ``cfg.seed + t`` so that stacks sharing a prefix of
    ``code_sizes`` also share those tiers.
    """
    if not code_sizes:
        raise DimensionError("code_sizes must not be empty")
    tiers, results = [], []
    h = np.asarray(inputs, dtype=np.float64)
    for t, m in enumerate(code_sizes):
        tier_cfg = dataclasses.replace(cfg, seed=cfg.seed + t)
        tier, result = pretrain_tier(h, m, tier_cfg)
        tiers.append(tier)
        results.append(result)
        h = tier.encode(h)
    return tiers, results


@dataclass
class Classifier:
    network: Network
    kind: str = "classifier"
    class_names: tuple[str, ...] = CLASS_NAMES

    @property
    def input_dim(self) -> int:
        return self.network.dims[0]

    @property
    def tag(self) -> str:
        return self.kind

    def predict_proba(self, X: np.ndarray) -> np.ndarray:
        return self.network.output(X)

    def predict(self, X: np.ndarray) -> tuple[np.ndarray | int, np.ndarray]:
        """Class index (argmax, ties to the lowest index) and probabilities.

        Accepts one input vector or a batch.
        """
        proba = self.predict_proba(X)
        return np.argmax(proba, axis=-1), proba

    def loss(self, X: np.ndarray, y: np.ndarray) -> float:
        return self.network.loss(X, one_hot_targets(y, self.network.dims[-1]))

    def accuracy(self, X: np.ndarray, y: np.ndarray) -> float:
        return float(np.mean(self.predict(X)[0] == np.asarray(y)))


@dataclass
class AeClassifier(Classifier):
    kind: str = "ae"
    code_sizes: tuple[int, ...] = ()

    @classmethod
    def assemble(cls, tiers: Sequence[AutoencoderTier], head: DenseLayer) -> AeClassifier:
        layers = [t.encoder_layer() for t in tiers] + [head]
        return cls(Network(layers, LossKind.CROSS_ENTROPY), code_sizes=tuple(t.n_code for t in tiers))

    @property
    def tag(self) -> str:
        return "AE[" + ",".join(str(m) for m in self.code_sizes) + "]"

    @property
    def head(self) -> DenseLayer:
        return self.network.layers[-1]


@dataclass
class MlpClassifier(Classifier):
    kind: str = "mlp"

    @property
    def tag(self) -> str:
        return "MLP"


def train_head(codes: np.ndarray, y: np.ndarray, cfg: TrainConfig,
               n_classes: int = N_CLASSES) -> tuple[DenseLayer, ScgResult]:
    """Softmax layer fitted with cross-entropy on fixed codes."""
    y = np.asarray(y)
    missing = sorted(set(range(n_classes)) - set(np.unique(y).tolist()))
    if missing:
        warnings.warn(f"classes {missing} absent from head training labels", RuntimeWarning, stacklevel=2)
    rng = np.random.default_rng(cfg.seed)
    net = Network([DenseLayer.create(codes.shape[1], n_classes, Activation.SOFTMAX, rng)],
                  LossKind.CROSS_ENTROPY)
    result = _fit(net, codes, one_hot_targets(y, n_classes), cfg, "softmax head")
    return net.layers[0], result


def fine_tune(clf: AeClassifier, X: np.ndarray, y: np.ndarray, cfg: TrainConfig) -> tuple[AeClassifier, ScgResult]:
    """Jointly optimise all encoder and head parameters; returns a new classifier."""
    net = clf.network.copy()
    result = _fit(net, X, one_hot_targets(y, net.dims[-1]), cfg, "fine-tune")
    return AeClassifier(net, code_sizes=clf.code_sizes, class_names=clf.class_names), result


def train_mlp(X: np.ndarray, y: np.ndarray, cfg: TrainConfig, hidden: int = 50,
              n_classes: int = N_CLASSES) -> tuple[MlpClassifier, ScgResult]:
    net = Network(
        [
            DenseLayer.create(X.shape[1], hidden, Activation.SATLIN),
            DenseLayer.create(hidden, n_classes, Activation.SOFTMAX),
        ],
        LossKind.CROSS_ENTROPY,
    )
    net.initialize(cfg.seed)
    result = _fit(net, X, one_hot_targets(y, n_classes), cfg, "mlp")
    return MlpClassifier(net), result


@dataclass
class TrainingLog:
    pretrain: list[ScgResult] = field(default_factory=list)
    head: ScgResult | None = None
    finetune: ScgResult | None = None
    mlp: ScgResult | None = None
    head_only_accuracy: float | None = None  # train accuracy before fine-tuning

    def summary(self) -> dict:
        def brief(r: ScgResult | None):
            if r is None:
                return None
            return {"iterations": r.iterations, "initial_loss": r.trace[0],
                    "final_loss": r.final_loss, "stop_reason": r.stop_reason}
        return {
            "pretrain": [brief(r) for r in self.pretrain],
            "head": brief(self.head),
            "finetune": brief(self.finetune),
            "mlp": brief(self.mlp),
            "head_only_accuracy": self.head_only_accuracy,
        }


def train_ae_classifier(
    X: np.ndarray,
    y: np.ndarray,
    code_sizes: Sequence[int] = (50,),
    seed: int = 0,
    pretrain_iters: int = 100,
    head_iters: int = 100,
    finetune_iters: int = 300,
    pretrained: Sequence[AutoencoderTier] | None = None,
) -> tuple[AeClassifier, TrainingLog]:
    """Greedy pretraining, softmax head, then fine-tuning.

    ``pretrained`` supplies tiers from an earlier ``greedy_pretrain`` run with
    the same seed; its leading tiers are reused in place of pretraining, which
    gives the same result because tier seeds depend only on their position.
    """
    log = TrainingLog()
    if pretrained is not None:
        tiers = list(pretrained[:len(code_sizes)])
        if tuple(t.n_code for t in tiers) != tuple(code_sizes) or tiers[0].n_in != X.shape[1]:
            raise DimensionError("pretrained tiers do not match code_sizes and input width")
    else:
        tiers, log.pretrain = greedy_pretrain(
            X, code_sizes, TrainConfig(max_iterations=pretrain_iters, seed=seed, objective="mse"))
    codes = X
    for tier in tiers:
        codes = tier.encode(codes)
    head, log.head = train_head(
        codes, y, TrainConfig(max_iterations=head_iters, seed=seed + len(tiers), objective="crossentropy"))
    clf = AeClassifier.assemble(tiers, head)
    log.head_only_accuracy = clf.accuracy(X, y)
    clf, log.finetune = fine_tune(
        clf, X, y, TrainConfig(max_iterations=finetune_iters, seed=seed, objective="crossentropy"))
    return clf, log
