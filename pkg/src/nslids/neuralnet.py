"""Dense feed-forward networks with exact backpropagation.

Parameters are exchanged with optimisers as one flat float64 vector. The
ordering is fixed: layers in forward order, and for each layer its weight
matrix (fan_in x fan_out, row-major, so input index varies slowest) followed
by its bias. A layer tied to an earlier one contributes only its bias; its
weight matrix is the transpose of the referenced layer's and its gradient is
accumulated into that layer's slot.
"""

from __future__ import annotations

import copy
import enum
from dataclasses import dataclass
from typing import Callable, Sequence

import numpy as np

from .errors import DimensionError

CE_LOG_FLOOR = 1e-12


class Activation(str, enum.Enum):
    SATLIN = "satlin"
    LINEAR = "linear"
    SOFTMAX = "softmax"


class LossKind(str, enum.Enum):
    MSE = "mse"
    CROSS_ENTROPY = "crossentropy"


def satlin(z: np.ndarray) -> np.ndarray:
    return np.clip(z, 0.0, 1.0)


def satlin_derivative(z: np.ndarray) -> np.ndarray:
    # boundary points 0 and 1 get derivative 0
    return ((z > 0.0) & (z < 1.0)).astype(np.float64)


def softmax(z: np.ndarray) -> np.ndarray:
    shifted = z - np.max(z, axis=-1, keepdims=True)
    e = np.exp(shifted)
    return e / np.sum(e, axis=-1, keepdims=True)


def _activate(kind: Activation, z: np.ndarray) -> np.ndarray:
    if kind is Activation.SATLIN:
        return satlin(z)
    if kind is Activation.LINEAR:
        return z
    return softmax(z)


def _backprop_activation(kind: Activation, z: np.ndarray, a: np.ndarray, da: np.ndarray) -> np.ndarray:
    """Map dL/da to dL/dz for one layer."""
    if kind is Activation.SATLIN:
        da = np.array(da, copy=True) if not da.flags.writeable else da
        da[(z <= 0.0) | (z >= 1.0)] = 0.0
        return da
    if kind is Activation.LINEAR:
        return da
    return a * (da - np.sum(da * a, axis=1, keepdims=True))


def glorot_uniform(rng: np.random.Generator, fan_in: int, fan_out: int) -> np.ndarray:
    limit = np.sqrt(6.0 / (fan_in + fan_out))
    return rng.uniform(-limit, limit, size=(fan_in, fan_out))


def init_parameters(dims: Sequence[int], seed: int) -> np.ndarray:
    """Flat parameters for an untied chain ``dims[0] -> dims[1] -> ...``.

    Weights are Glorot-uniform, biases zero.
    """
    rng = np.random.default_rng(seed)
    parts = []
    for fan_in, fan_out in zip(dims[:-1], dims[1:]):
        parts.append(glorot_uniform(rng, fan_in, fan_out).ravel())
        parts.append(np.zeros(fan_out))
    return np.concatenate(parts) if parts else np.zeros(0)


@dataclass
class DenseLayer:
    weights: np.ndarray | None
    bias: np.ndarray
    activation: Activation
    tied_to: int | None = None

    def __post_init__(self) -> None:
        self.activation = Activation(self.activation)
        self.bias = np.asarray(self.bias, dtype=np.float64)
        if self.weights is not None:
            self.weights = np.asarray(self.weights, dtype=np.float64)

    @classmethod
    def create(cls, fan_in: int, fan_out: int, activation: Activation | str,
               rng: np.random.Generator | None = None) -> DenseLayer:
        w = glorot_uniform(rng, fan_in, fan_out) if rng is not None else np.zeros((fan_in, fan_out))
        return cls(w, np.zeros(fan_out), Activation(activation))


class Network:
    """Ordered dense layers plus a loss.

    ``forward`` accepts a single vector or an (n, fan_in) batch; ``loss`` and
    ``gradient`` take a batch of inputs and targets and average over samples.
    """

    def __init__(self, layers: Sequence[DenseLayer], loss: LossKind | str):
        self.layers = list(layers)
        self.loss_kind = LossKind(loss)
        self._validate()

    def _validate(self) -> None:
        if not self.layers:
            raise DimensionError("network needs at least one layer")
        prev_out = None
        for i, layer in enumerate(self.layers):
            if layer.tied_to is not None:
                if layer.weights is not None:
                    raise DimensionError(f"layer {i} is tied but carries its own weights")
                if not 0 <= layer.tied_to < i or self.layers[layer.tied_to].tied_to is not None:
                    raise DimensionError(f"layer {i} is tied to invalid layer {layer.tied_to}")
            elif layer.weights is None or layer.weights.ndim != 2:
                raise DimensionError(f"layer {i} has no weight matrix")
            w = self.weight(i)
            if layer.bias.shape != (w.shape[1],):
                raise DimensionError(f"layer {i}: bias length {layer.bias.shape} != fan_out {w.shape[1]}")
            if prev_out is not None and w.shape[0] != prev_out:
                raise DimensionError(f"layer {i}: fan_in {w.shape[0]} != previous fan_out {prev_out}")
            if layer.activation is Activation.SOFTMAX and i != len(self.layers) - 1:
                raise DimensionError("softmax is only allowed on the output layer")
            prev_out = w.shape[1]
        if self.loss_kind is LossKind.CROSS_ENTROPY and self.layers[-1].activation is not Activation.SOFTMAX:
            raise DimensionError("cross-entropy requires a softmax output layer")

    def weight(self, i: int) -> np.ndarray:
        layer = self.layers[i]
        if layer.tied_to is not None:
            return self.layers[layer.tied_to].weights.T
        return layer.weights

    @property
    def dims(self) -> list[int]:
        return [self.weight(0).shape[0]] + [self.weight(i).shape[1] for i in range(len(self.layers))]

    @property
    def activations(self) -> list[Activation]:
        return [layer.activation for layer in self.layers]

    # -- parameter vector ---------------------------------------------------

    @property
    def n_params(self) -> int:
        return sum(
            (0 if layer.weights is None else layer.weights.size) + layer.bias.size
            for layer in self.layers
        )

    def get_params(self) -> np.ndarray:
        parts = []
        for layer in self.layers:
            if layer.weights is not None:
                parts.append(layer.weights.ravel())
            parts.append(layer.bias)
        return np.concatenate(parts)

    def set_params(self, theta: np.ndarray) -> None:
        theta = np.asarray(theta, dtype=np.float64)
        if theta.shape != (self.n_params,):
            raise DimensionError(f"expected {self.n_params} parameters, got {theta.shape}")
        pos = 0
        for layer in self.layers:
            if layer.weights is not None:
                size = layer.weights.size
                layer.weights = theta[pos:pos + size].reshape(layer.weights.shape).copy()
                pos += size
            layer.bias = theta[pos:pos + layer.bias.size].copy()
            pos += layer.bias.size

    def initialize(self, seed: int) -> None:
        """Glorot-uniform weights, zero biases; deterministic per seed."""
        rng = np.random.default_rng(seed)
        for layer in self.layers:
            if layer.weights is not None:
                layer.weights = glorot_uniform(rng, *layer.weights.shape)
            layer.bias = np.zeros_like(layer.bias)

    def copy(self) -> Network:
        return copy.deepcopy(self)

    # -- evaluation -----------------------------------------------------------

    def _forward(self, x: np.ndarray) -> tuple[list[np.ndarray], list[np.ndarray]]:
        acts = [x]
        zs = []
        for i, layer in enumerate(self.layers):
            z = acts[-1] @ self.weight(i)
            z += layer.bias
            zs.append(z)
            acts.append(_activate(layer.activation, z))
        return zs, acts

    def _as_batch(self, x: np.ndarray) -> np.ndarray:
        x = np.asarray(x, dtype=np.float64)
        fan_in = self.weight(0).shape[0]
        if x.ndim not in (1, 2) or x.shape[-1] != fan_in:
            raise DimensionError(f"input has shape {x.shape}, network expects {fan_in} features")
        return x

    def forward(self, x: np.ndarray) -> list[np.ndarray]:
        """Per-layer outputs; the last entry is the network output."""
        x = self._as_batch(x)
        if x.ndim == 1:
            return [a[0] for a in self._forward(x[None, :])[1][1:]]
        return self._forward(x)[1][1:]

    def output(self, x: np.ndarray) -> np.ndarray:
        return self.forward(x)[-1]

    def _check_targets(self, X: np.ndarray, T: np.ndarray) -> tuple[np.ndarray, np.ndarray]:
        X = self._as_batch(X)
        if X.ndim == 1:
            X = X[None, :]
        T = np.asarray(T, dtype=np.float64)
        if T.ndim == 1:
            T = T[None, :]
        if T.shape != (X.shape[0], self.dims[-1]):
            raise DimensionError(f"targets have shape {T.shape}, expected ({X.shape[0]}, {self.dims[-1]})")
        if self.loss_kind is LossKind.CROSS_ENTROPY:
            binary = np.all((T == 0.0) | (T == 1.0), axis=1)
            if not np.all(binary & (T.sum(axis=1) == 1.0)):
                bad = int(np.argmin(binary & (T.sum(axis=1) == 1.0)))
                raise DimensionError(f"target row {bad} is not one-hot")
        return X, T

    def _loss_value(self, out: np.ndarray, T: np.ndarray) -> float:
        if self.loss_kind is LossKind.MSE:
            diff = (out - T).ravel()
            return float(diff @ diff) / diff.size
        return float(-np.sum(T * np.log(np.maximum(out, CE_LOG_FLOOR))) / out.shape[0])

    def loss(self, X: np.ndarray, T: np.ndarray) -> float:
        X, T = self._check_targets(X, T)
        return self._loss_value(self._forward(X)[1][-1], T)

    def loss_and_gradient(self, X: np.ndarray, T: np.ndarray) -> tuple[float, np.ndarray]:
        X, T = self._check_targets(X, T)
        zs, acts = self._forward(X)
        return self._loss_value(acts[-1], T), self._backward(zs, acts, T)

    def _backward(self, zs: list[np.ndarray], acts: list[np.ndarray], T: np.ndarray) -> np.ndarray:
        out = acts[-1]
        n = out.shape[0]
        last = self.layers[-1]
        if self.loss_kind is LossKind.CROSS_ENTROPY:
            delta = (out - T) / n
        else:
            diff = out - T
            diff *= 2.0 / out.size
            delta = _backprop_activation(last.activation, zs[-1], out, diff)

        grads_w: list[np.ndarray | None] = [None] * len(self.layers)
        grads_b: list[np.ndarray] = [None] * len(self.layers)  # type: ignore[list-item]
        for i in range(len(self.layers) - 1, -1, -1):
            gw = acts[i].T @ delta
            grads_b[i] = delta.sum(axis=0)
            tied = self.layers[i].tied_to
            if tied is None:
                grads_w[i] = gw if grads_w[i] is None else grads_w[i] + gw
            else:
                grads_w[tied] = gw.T if grads_w[tied] is None else grads_w[tied] + gw.T
            if i > 0:
                da = delta @ self.weight(i).T
                delta = _backprop_activation(self.layers[i - 1].activation, zs[i - 1], acts[i], da)

        parts = []
        for i, layer in enumerate(self.layers):
            if layer.weights is not None:
                parts.append(grads_w[i].ravel())
            parts.append(grads_b[i])
        return np.concatenate(parts)

    def gradient(self, X: np.ndarray, T: np.ndarray) -> np.ndarray:
        return self.loss_and_gradient(X, T)[1]

    def objective(self, X: np.ndarray, T: np.ndarray) -> tuple[Callable, Callable]:
        """(loss, gradient) callbacks of the flat parameter vector.

        The callbacks work on a private copy, so the network itself is left
        untouched while an optimiser probes trial points. The forward pass of
        the most recent point is kept, so asking for the gradient where the
        loss was just evaluated costs only the backward pass.
        """
        work = self.copy()
        X, T = work._check_targets(X, T)
        cache: dict = {"theta": None}

        def forward(theta: np.ndarray):
            if cache["theta"] is None or not np.array_equal(cache["theta"], theta):
                work.set_params(theta)
                cache["theta"] = np.array(theta, copy=True)
                cache["pass"] = work._forward(X)
            return cache["pass"]

        def fun(theta: np.ndarray) -> float:
            return work._loss_value(forward(theta)[1][-1], T)

        def grad(theta: np.ndarray) -> np.ndarray:
            zs, acts = forward(theta)
            return work._backward(zs, acts, T)

        return fun, grad
