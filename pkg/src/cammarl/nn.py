"""Dense feed-forward networks with analytic gradients and Adam.

Small by design: enough for two-hidden-layer actors, critics, and action
classifiers at double precision.  Hidden layers use one activation (tanh or
relu), the final layer is always linear (logits or values).
"""

from __future__ import annotations

import json
import math
from dataclasses import dataclass, field
from pathlib import Path

import numpy as np

HIDDEN_SIZE = 64

CHECKPOINT_FORMAT_VERSION = 1

_ACTIVATIONS = ("tanh", "relu")


@dataclass
class Mlp:
    """Weights, biases, and Adam state for one dense network.

    ``weights[i]`` has shape (dims[i], dims[i+1]); ``biases[i]`` has shape
    (dims[i+1],).  Optimizer moments mirror the parameter shapes.
    """

    dims: tuple[int, ...]
    activation: str
    weights: list[np.ndarray]
    biases: list[np.ndarray]
    m_w: list[np.ndarray] = field(default_factory=list)
    v_w: list[np.ndarray] = field(default_factory=list)
    m_b: list[np.ndarray] = field(default_factory=list)
    v_b: list[np.ndarray] = field(default_factory=list)
    step_count: int = 0

    @property
    def input_dim(self) -> int:
        return self.dims[0]

    @property
    def output_dim(self) -> int:
        return self.dims[-1]


@dataclass
class ForwardCache:
    """Per-layer inputs and pre-activations for one forward pass."""

    inputs: list[np.ndarray]  # activations entering each layer; inputs[0] is the batch
    pre_activations: list[np.ndarray]


@dataclass
class Gradients:
    weights: list[np.ndarray]
    biases: list[np.ndarray]


def mlp_init(dims, activation: str, seed) -> Mlp:
    """Build a network with Glorot-uniform weights and zero biases.

    ``seed`` may be an int or a numpy Generator; identical seeds give
    identical parameters.
    """
    dims = tuple(int(d) for d in dims)
    if len(dims) < 2:
        raise ValueError(f"need at least input and output dims, got {dims}")
    if any(d < 1 for d in dims):
        raise ValueError(f"zero-sized layer in dims {dims}")
    if activation not in _ACTIVATIONS:
        raise ValueError(f"unknown activation {activation!r}; expected one of {_ACTIVATIONS}")
    rng = seed if isinstance(seed, np.random.Generator) else np.random.default_rng(seed)
    weights = []
    biases = []
    for fan_in, fan_out in zip(dims[:-1], dims[1:]):
        bound = math.sqrt(6.0 / (fan_in + fan_out))
        weights.append(rng.uniform(-bound, bound, size=(fan_in, fan_out)))
        biases.append(np.zeros(fan_out))
    mlp = Mlp(dims=dims, activation=activation, weights=weights, biases=biases)
    _ensure_moments(mlp)
    return mlp


def _ensure_moments(mlp: Mlp) -> None:
    if not mlp.m_w:
        mlp.m_w = [np.zeros_like(w) for w in mlp.weights]
        mlp.v_w = [np.zeros_like(w) for w in mlp.weights]
        mlp.m_b = [np.zeros_like(b) for b in mlp.biases]
        mlp.v_b = [np.zeros_like(b) for b in mlp.biases]


def _activate(z: np.ndarray, activation: str) -> np.ndarray:
    if activation == "tanh":
        return np.tanh(z)
    return np.maximum(z, 0.0)


def _activate_grad(z: np.ndarray, a: np.ndarray, activation: str) -> np.ndarray:
    if activation == "tanh":
        return 1.0 - a * a
    return (z > 0.0).astype(z.dtype)


def forward(mlp: Mlp, batch: np.ndarray) -> tuple[np.ndarray, ForwardCache]:
    """Run the network on a (n, input_dim) batch; final layer is linear."""
    batch = np.asarray(batch, dtype=np.float64)
    squeeze = batch.ndim == 1
    if squeeze:
        batch = batch[None, :]
    if batch.shape[1] != mlp.input_dim:
        raise ValueError(f"batch has {batch.shape[1]} features, network expects {mlp.input_dim}")
    inputs = [batch]
    pre = []
    a = batch
    last = len(mlp.weights) - 1
    for i, (w, b) in enumerate(zip(mlp.weights, mlp.biases)):
        z = a @ w + b
        pre.append(z)
        a = z if i == last else _activate(z, mlp.activation)
        if i != last:
            inputs.append(a)
    out = a[0] if squeeze else a
    return out, ForwardCache(inputs=inputs, pre_activations=pre)


def backward(mlp: Mlp, cache: ForwardCache, output_grad: np.ndarray) -> Gradients:
    """Exact gradients of sum(output * output_grad) w.r.t. every parameter."""
    g = np.asarray(output_grad, dtype=np.float64)
    if g.ndim == 1:
        g = g[None, :]
    if g.shape != cache.pre_activations[-1].shape:
        raise ValueError(
            f"output_grad shape {g.shape} does not match forward output {cache.pre_activations[-1].shape}"
        )
    n_layers = len(mlp.weights)
    d_w = [None] * n_layers
    d_b = [None] * n_layers
    delta = g
    for i in range(n_layers - 1, -1, -1):
        d_w[i] = cache.inputs[i].T @ delta
        d_b[i] = delta.sum(axis=0)
        if i > 0:
            delta = delta @ mlp.weights[i].T
            delta = delta * _activate_grad(cache.pre_activations[i - 1], cache.inputs[i], mlp.activation)
    return Gradients(weights=d_w, biases=d_b)


def adam_step(
    mlp: Mlp,
    grads: Gradients,
    lr: float,
    beta1: float = 0.9,
    beta2: float = 0.999,
    eps: float = 1e-8,
) -> Mlp:
    """One bias-corrected Adam update, mutating ``mlp`` in place."""
    _ensure_moments(mlp)
    mlp.step_count += 1
    t = mlp.step_count
    c1 = 1.0 - beta1**t
    c2 = 1.0 - beta2**t
    for params, gs, ms, vs in (
        (mlp.weights, grads.weights, mlp.m_w, mlp.v_w),
        (mlp.biases, grads.biases, mlp.m_b, mlp.v_b),
    ):
        for p, g, m, v in zip(params, gs, ms, vs):
            m *= beta1
            m += (1.0 - beta1) * g
            v *= beta2
            v += (1.0 - beta2) * (g * g)
            p -= lr * (m / c1) / (np.sqrt(v / c2) + eps)
    return mlp


def softmax(logits: np.ndarray) -> np.ndarray:
    """Stable softmax along the last axis."""
    z = np.asarray(logits, dtype=np.float64)
    z = z - z.max(axis=-1, keepdims=True)
    e = np.exp(z)
    return e / e.sum(axis=-1, keepdims=True)


def log_softmax(logits: np.ndarray) -> np.ndarray:
    z = np.asarray(logits, dtype=np.float64)
    z = z - z.max(axis=-1, keepdims=True)
    return z - np.log(np.exp(z).sum(axis=-1, keepdims=True))


def softmax_cross_entropy(logits: np.ndarray, label) -> tuple[float, np.ndarray]:
    """Cross-entropy loss and its logit gradient, log-sum-exp stable.

    1-D logits with an int label give the single-sample loss; 2-D logits
    with a label vector give the batch mean, with the gradient scaled to
    match (softmax - one_hot, divided by the batch size).
    """
    z = np.asarray(logits, dtype=np.float64)
    if z.ndim == 1:
        label = int(label)
        if not 0 <= label < z.shape[0]:
            raise ValueError(f"label {label} out of range for {z.shape[0]} classes")
        logp = log_softmax(z)
        grad = np.exp(logp)
        grad[label] -= 1.0
        return float(-logp[label]), grad
    labels = np.asarray(label, dtype=np.intp)
    if labels.ndim != 1 or labels.shape[0] != z.shape[0]:
        raise ValueError("label vector must match the batch size")
    if labels.size and (labels.min() < 0 or labels.max() >= z.shape[1]):
        raise ValueError("label out of range")
    logp = log_softmax(z)
    n = z.shape[0]
    loss = float(-logp[np.arange(n), labels].mean())
    grad = np.exp(logp)
    grad[np.arange(n), labels] -= 1.0
    grad /= n
    return loss, grad


def parameter_count(mlp: Mlp) -> int:
    return sum(w.size for w in mlp.weights) + sum(b.size for b in mlp.biases)


def flatten_parameters(mlp: Mlp) -> np.ndarray:
    """Weights then biases, layer by layer, row-major."""
    parts = [w.ravel() for w in mlp.weights] + [b.ravel() for b in mlp.biases]
    return np.concatenate(parts)


def set_parameters(mlp: Mlp, flat: np.ndarray) -> None:
    flat = np.asarray(flat, dtype=np.float64)
    if flat.size != parameter_count(mlp):
        raise ValueError(f"expected {parameter_count(mlp)} parameters, got {flat.size}")
    offset = 0
    for w in mlp.weights:
        w[...] = flat[offset : offset + w.size].reshape(w.shape)
        offset += w.size
    for b in mlp.biases:
        b[...] = flat[offset : offset + b.size]
        offset += b.size


def to_checkpoint(mlp: Mlp) -> dict:
    """Serializable snapshot: dims header plus one flat parameter array."""
    return {
        "format_version": CHECKPOINT_FORMAT_VERSION,
        "dims": list(mlp.dims),
        "activation": mlp.activation,
        "params": flatten_parameters(mlp).tolist(),
    }


def from_checkpoint(blob: dict) -> Mlp:
    if blob.get("format_version") != CHECKPOINT_FORMAT_VERSION:
        raise ValueError(f"unsupported checkpoint format_version {blob.get('format_version')!r}")
    mlp = mlp_init(blob["dims"], blob["activation"], seed=0)
    set_parameters(mlp, np.asarray(blob["params"]))
    return mlp


def save_checkpoint(mlp: Mlp, path) -> None:
    Path(path).write_text(json.dumps(to_checkpoint(mlp)))


def load_checkpoint(path) -> Mlp:
    return from_checkpoint(json.loads(Path(path).read_text()))
