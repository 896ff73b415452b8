"""Model artifact and encoded-dataset cache files.

The artifact is one JSON document. Parameters are stored as a single
base64-encoded little-endian float64 array in the network's flat ordering:
layers in forward order, each layer's weights row-major over
(fan_in, fan_out) followed by its bias.
"""

from __future__ import annotations

import base64
import binascii
import hashlib
import json
from dataclasses import dataclass, field
from pathlib import Path

import numpy as np

from .errors import DataError
from .features import FeatureSchema
from .models import AeClassifier, Classifier, MlpClassifier
from .neuralnet import Activation, DenseLayer, LossKind, Network

FORMAT_NAME = "nslids-model"
FORMAT_VERSION = 1
PARAMETER_ORDER = "layers in forward order; per layer weights row-major (fan_in x fan_out), then bias"


class ArtifactError(DataError):
    pass


def config_hash(config: dict) -> str:
    blob = json.dumps(config, sort_keys=True, separators=(",", ":"), default=str)
    return hashlib.sha256(blob.encode()).hexdigest()[:16]


def encode_array(a: np.ndarray) -> str:
    return base64.b64encode(np.ascontiguousarray(a, dtype="<f8").tobytes()).decode("ascii")


def decode_array(s: str) -> np.ndarray:
    try:
        raw = base64.b64decode(s.encode("ascii"), validate=True)
    except (binascii.Error, ValueError) as exc:
        raise ArtifactError(f"corrupt parameter block: {exc}") from exc
    if len(raw) % 8:
        raise ArtifactError("parameter block length is not a multiple of 8 bytes")
    return np.frombuffer(raw, dtype="<f8").astype(np.float64)


@dataclass
class ModelArtifact:
    classifier: Classifier
    schema: FeatureSchema
    config: dict = field(default_factory=dict)
    training: dict = field(default_factory=dict)

    def to_dict(self) -> dict:
        net = self.classifier.network
        layers = []
        for i, layer in enumerate(net.layers):
            w = net.weight(i)
            layers.append({"fan_in": int(w.shape[0]), "fan_out": int(w.shape[1]),
                           "activation": layer.activation.value})
        model = {
            "kind": self.classifier.kind,
            "tag": self.classifier.tag,
            "loss": net.loss_kind.value,
            "layers": layers,
            "n_params": net.n_params,
            "parameter_order": PARAMETER_ORDER,
            "dtype": "float64-le",
            "parameters": encode_array(net.get_params()),
        }
        if isinstance(self.classifier, AeClassifier):
            model["code_sizes"] = list(self.classifier.code_sizes)
        return {
            "format": FORMAT_NAME,
            "version": FORMAT_VERSION,
            "schema": self.schema.to_dict(),
            "schema_hash": self.schema.digest(),
            "model": model,
            "classes": list(self.classifier.class_names),
            "config": self.config,
            "config_hash": config_hash(self.config),
            "training": self.training,
        }

    @property
    def config_hash(self) -> str:
        return config_hash(self.config)

    def save(self, path: str | Path) -> None:
        path = Path(path)
        path.parent.mkdir(parents=True, exist_ok=True)
        tmp = path.with_suffix(path.suffix + ".tmp")
        tmp.write_text(json.dumps(self.to_dict(), indent=1) + "\n")
        tmp.replace(path)

    @classmethod
    def from_dict(cls, d: dict) -> ModelArtifact:
        if d.get("format") != FORMAT_NAME:
            raise ArtifactError(f"unknown artifact format {d.get('format')!r}")
        if d.get("version") != FORMAT_VERSION:
            raise ArtifactError(f"unsupported artifact version {d.get('version')!r} "
                                f"(this build reads version {FORMAT_VERSION})")
        try:
            schema = FeatureSchema.from_dict(d["schema"])
            if d.get("schema_hash") not in (None, schema.digest()):
                raise ArtifactError("schema hash does not match the stored schema")
            m = d["model"]
            theta = decode_array(m["parameters"])
            layers = []
            for entry in m["layers"]:
                layers.append(DenseLayer(np.zeros((entry["fan_in"], entry["fan_out"])),
                                         np.zeros(entry["fan_out"]), Activation(entry["activation"])))
            net = Network(layers, LossKind(m["loss"]))
            if theta.size != net.n_params:
                raise ArtifactError(f"declared topology needs {net.n_params} parameters, "
                                    f"found {theta.size}")
            net.set_params(theta)
            classes = tuple(d["classes"])
            if m["kind"] == "ae":
                clf: Classifier = AeClassifier(net, class_names=classes,
                                               code_sizes=tuple(m.get("code_sizes", ())))
            elif m["kind"] == "mlp":
                clf = MlpClassifier(net, class_names=classes)
            else:
                raise ArtifactError(f"unknown model kind {m['kind']!r}")
        except (KeyError, TypeError, ValueError) as exc:
            raise ArtifactError(f"malformed artifact: {exc!r}") from exc
        if net.dims[0] != schema.input_dim:
            raise ArtifactError(f"network input {net.dims[0]} != schema input_dim {schema.input_dim}")
        return cls(clf, schema, d.get("config", {}), d.get("training", {}))

    @classmethod
    def load(cls, path: str | Path) -> ModelArtifact:
        path = Path(path)
        try:
            d = json.loads(path.read_text())
        except FileNotFoundError:
            raise ArtifactError(f"{path}: no such artifact") from None
        except (ValueError, UnicodeDecodeError) as exc:
            raise ArtifactError(f"{path}: unreadable artifact ({exc})") from exc
        if not isinstance(d, dict):
            raise ArtifactError(f"{path}: artifact is not a JSON object")
        return cls.from_dict(d)


@dataclass
class EncodedCache:
    X_train: np.ndarray
    y_train: np.ndarray
    X_test: np.ndarray
    y_test: np.ndarray
    schema_hash: str

    def save(self, path: str | Path) -> None:
        path = Path(path)
        path.parent.mkdir(parents=True, exist_ok=True)
        with path.open("wb") as fh:
            np.savez_compressed(fh, X_train=self.X_train, y_train=self.y_train,
                                X_test=self.X_test, y_test=self.y_test,
                                schema_hash=np.array(self.schema_hash))

    @classmethod
    def load(cls, path: str | Path) -> EncodedCache:
        try:
            with np.load(path, allow_pickle=False) as z:
                return cls(z["X_train"], z["y_train"], z["X_test"], z["y_test"],
                           str(z["schema_hash"]))
        except FileNotFoundError:
            raise DataError(f"{path}: no encoded cache (run `nslids prepare` first)") from None
        except (OSError, KeyError, ValueError) as exc:
            raise DataError(f"{path}: unreadable encoded cache ({exc})") from exc
