"""Small feedforward classifier in plain numpy.

Shared by the proxy segmentation model and the label correction network.
Weights are stored as ``(fan_in, fan_out)`` matrices so that a batch ``X`` of
shape ``(n, fan_in)`` maps through ``X @ W + b``.

Text serialization format (one record per line, LF endings)::

    a2lc-mlp 1
    activation <tag>
    dims <d0> <d1> ... <dL>
    W<i> <row-major float values>
    b<i> <float values>

Floats are written with ``repr`` so a save/load round trip is bit-exact.
"""

from __future__ import annotations

from dataclasses import dataclass, field
from pathlib import Path
from typing import Callable, Sequence

import numpy as np
from scipy.special import erf

ACTIVATIONS = ("relu", "tanh", "gelu", "mish")

_SQRT2 = np.sqrt(2.0)
_INV_SQRT_2PI = 1.0 / np.sqrt(2.0 * np.pi)
_FORMAT_TAG = "a2lc-mlp 1"


def _relu(z):
    return np.maximum(z, 0.0)


def _relu_grad(z, a):
    return (z > 0).astype(z.dtype)


def _tanh(z):
    return np.tanh(z)


def _tanh_grad(z, a):
    return 1.0 - a * a


def _gelu(z):
    return 0.5 * z * (1.0 + erf(z / _SQRT2))


def _gelu_grad(z, a):
    cdf = 0.5 * (1.0 + erf(z / _SQRT2))
    return cdf + z * _INV_SQRT_2PI * np.exp(-0.5 * z * z)


def _mish(z):
    return z * np.tanh(np.logaddexp(0.0, z))


def _mish_grad(z, a):
    t = np.tanh(np.logaddexp(0.0, z))
    sig = 0.5 * (1.0 + np.tanh(0.5 * z))
    return t + z * (1.0 - t * t) * sig


_ACT: dict[str, tuple[Callable, Callable]] = {
    "relu": (_relu, _relu_grad),
    "tanh": (_tanh, _tanh_grad),
    "gelu": (_gelu, _gelu_grad),
    "mish": (_mish, _mish_grad),
}


def softmax(logits: np.ndarray) -> np.ndarray:
    shifted = logits - logits.max(axis=-1, keepdims=True)
    e = np.exp(shifted)
    return e / e.sum(axis=-1, keepdims=True)


def log_softmax(logits: np.ndarray) -> np.ndarray:
    shifted = logits - logits.max(axis=-1, keepdims=True)
    return shifted - np.log(np.exp(shifted).sum(axis=-1, keepdims=True))


@dataclass(eq=False)
class MLP:
    """Fully connected net ``dims[0] -> ... -> dims[-1]`` with softmax output."""

    weights: list[np.ndarray]
    biases: list[np.ndarray]
    activation: str = "relu"
    history: list[float] = field(default_factory=list)

    def __post_init__(self) -> None:
        if self.activation not in _ACT:
            raise ValueError(f"unknown activation {self.activation!r}; expected one of {ACTIVATIONS}")
        if len(self.weights) != len(self.biases) or not self.weights:
            raise ValueError("weights and biases must be nonempty and of equal length")
        for i, (w, b) in enumerate(zip(self.weights, self.biases)):
            if w.ndim != 2 or b.shape != (w.shape[1],):
                raise ValueError(f"layer {i}: inconsistent weight/bias shapes {w.shape}, {b.shape}")
            if i and self.weights[i - 1].shape[1] != w.shape[0]:
                raise ValueError(f"layer {i}: input dim {w.shape[0]} != previous output dim")

    @classmethod
    def init(cls, dims: Sequence[int], activation: str, rng: np.random.Generator) -> "MLP":
        if len(dims) < 2 or any(int(d) <= 0 for d in dims):
            raise ValueError(f"dims must list at least two positive sizes, got {list(dims)}")
        if activation not in _ACT:
            raise ValueError(f"unknown activation {activation!r}; expected one of {ACTIVATIONS}")
        gain = 1.0 if activation == "tanh" else 2.0
        weights, biases = [], []
        for fan_in, fan_out in zip(dims[:-1], dims[1:]):
            weights.append(rng.normal(0.0, np.sqrt(gain / fan_in), size=(fan_in, fan_out)))
            biases.append(np.zeros(fan_out))
        return cls(weights, biases, activation)

    @property
    def dims(self) -> list[int]:
        return [self.weights[0].shape[0]] + [w.shape[1] for w in self.weights]

    @property
    def input_dim(self) -> int:
        return self.weights[0].shape[0]

    @property
    def num_outputs(self) -> int:
        return self.weights[-1].shape[1]

    def copy(self) -> "MLP":
        return MLP([w.copy() for w in self.weights], [b.copy() for b in self.biases],
                   self.activation, list(self.history))

    def _check_input(self, x: np.ndarray) -> np.ndarray:
        x = np.asarray(x, dtype=float)
        if x.shape[-1] != self.input_dim:
            raise ValueError(f"feature dimension {x.shape[-1]} does not match model input {self.input_dim}")
        return x

    def _forward(self, x: np.ndarray):
        act, _ = _ACT[self.activation]
        pre, post = [], [x]
        h = x
        for w, b in zip(self.weights[:-1], self.biases[:-1]):
            z = h @ w + b
            h = act(z)
            pre.append(z)
            post.append(h)
        logits = h @ self.weights[-1] + self.biases[-1]
        return logits, pre, post

    def hidden(self, x: np.ndarray) -> np.ndarray:
        """Activation of the last hidden layer (the input itself if there is none)."""
        x = self._check_input(x)
        return self._forward(x)[2][-1]

    def logits(self, x: np.ndarray) -> np.ndarray:
        return self._forward(self._check_input(x))[0]

    def probs(self, x: np.ndarray) -> np.ndarray:
        return softmax(self.logits(x))

    def loss(self, x: np.ndarray, y: np.ndarray, sample_weight: np.ndarray | None = None) -> float:
        x = self._check_input(x)
        logp = log_softmax(self._forward(x)[0])
        nll = -logp[np.arange(len(y)), y]
        if sample_weight is not None:
            nll = nll * sample_weight
        return float(nll.mean())

    def loss_and_grads(self, x: np.ndarray, y: np.ndarray, sample_weight: np.ndarray | None = None):
        """Mean (optionally per-sample weighted) cross-entropy and its parameter gradients."""
        x = self._check_input(x)
        y = np.asarray(y, dtype=int)
        n = len(y)
        logits, pre, post = self._forward(x)
        logp = log_softmax(logits)
        nll = -logp[np.arange(n), y]
        sw = np.ones(n) if sample_weight is None else np.asarray(sample_weight, dtype=float)
        loss = float((nll * sw).mean())

        delta = np.exp(logp)
        delta[np.arange(n), y] -= 1.0
        delta *= (sw / n)[:, None]

        _, act_grad = _ACT[self.activation]
        gw = [np.empty(0)] * len(self.weights)
        gb = [np.empty(0)] * len(self.biases)
        for i in range(len(self.weights) - 1, -1, -1):
            gw[i] = post[i].T @ delta
            gb[i] = delta.sum(axis=0)
            if i:
                delta = (delta @ self.weights[i].T) * act_grad(pre[i - 1], post[i])
        return loss, gw, gb

    def fit(self, x: np.ndarray, y: np.ndarray, *, epochs: int, learning_rate: float,
            batch_size: int = 0, rng: np.random.Generator | None = None,
            sample_weight: np.ndarray | None = None) -> list[float]:
        """Plain mini-batch gradient descent, in place.

        ``batch_size <= 0`` or ``>= len(x)`` runs full-batch steps in data order.
        Returns the full-data loss before training and after every epoch.
        """
        x = self._check_input(x)
        y = np.asarray(y, dtype=int)
        n = len(y)
        sw = None if sample_weight is None else np.asarray(sample_weight, dtype=float)
        full_batch = batch_size <= 0 or batch_size >= n
        if not full_batch and rng is None:
            raise ValueError("mini-batch training needs an rng for shuffling")
        history = [self.loss(x, y, sw)]
        for _ in range(epochs):
            if full_batch:
                batches = [slice(None)]
            else:
                order = rng.permutation(n)
                batches = [order[i:i + batch_size] for i in range(0, n, batch_size)]
            for idx in batches:
                _, gw, gb = self.loss_and_grads(x[idx], y[idx], None if sw is None else sw[idx])
                for w, g in zip(self.weights, gw):
                    w -= learning_rate * g
                for b, g in zip(self.biases, gb):
                    b -= learning_rate * g
            history.append(self.loss(x, y, sw))
        self.history = history
        return history

    # serialization

    def dumps(self) -> str:
        lines = [_FORMAT_TAG, f"activation {self.activation}", "dims " + " ".join(map(str, self.dims))]
        for i, (w, b) in enumerate(zip(self.weights, self.biases)):
            lines.append(f"W{i} " + " ".join(repr(float(v)) for v in w.ravel()))
            lines.append(f"b{i} " + " ".join(repr(float(v)) for v in b))
        return "\n".join(lines) + "\n"

    @classmethod
    def loads(cls, text: str) -> "MLP":
        lines = text.rstrip("\n").split("\n")
        if not lines or lines[0] != _FORMAT_TAG:
            raise ValueError("not an a2lc-mlp file")
        fields = dict(line.split(" ", 1) for line in lines[1:])
        activation = fields["activation"].strip()
        dims = [int(v) for v in fields["dims"].split()]
        weights, biases = [], []
        for i, (fan_in, fan_out) in enumerate(zip(dims[:-1], dims[1:])):
            w = np.array([float(v) for v in fields[f"W{i}"].split()])
            b = np.array([float(v) for v in fields[f"b{i}"].split()])
            if w.size != fan_in * fan_out or b.size != fan_out:
                raise ValueError(f"layer {i}: block size does not match dims header")
            weights.append(w.reshape(fan_in, fan_out))
            biases.append(b)
        return cls(weights, biases, activation)

    def save(self, path: str | Path) -> None:
        Path(path).write_text(self.dumps(), newline="\n")

    @classmethod
    def load(cls, path: str | Path) -> "MLP":
        return cls.loads(Path(path).read_text())
