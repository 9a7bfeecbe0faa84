"""Small dense classifier with a hand-rolled forward pass and backprop.

The network is a plain MLP: linear layers with relu or tanh hidden
activations and a linear output layer that emits one logit per class.
All parameters live in one flat float64 vector, laid out layer by layer
as the row-major weight matrix followed by the bias vector; that flat
vector is what the sparsifiers and the aggregation code operate on.

Loss is the batch mean of cross-entropy, computed with max-subtracted
log-sum-exp. Per-sample losses are accumulated left to right over the
batch, so a fixed sample order gives a bit-identical loss.
"""

from __future__ import annotations

from dataclasses import dataclass

import numpy as np

ACTIVATIONS = ("relu", "tanh")


@dataclass(frozen=True)
class ModelSpec:
    """Architecture description.

    layer_sizes[0] is the input dimension, layer_sizes[-1] the class
    count; anything in between is a hidden width. seed drives the
    deterministic initialization.
    """

    layer_sizes: tuple[int, ...]
    activation: str = "relu"
    seed: int = 0

    def __post_init__(self):
        object.__setattr__(self, "layer_sizes", tuple(int(n) for n in self.layer_sizes))
        if len(self.layer_sizes) < 2:
            raise ValueError("layer_sizes needs at least an input and an output size")
        if any(n < 1 for n in self.layer_sizes):
            raise ValueError("every layer size must be >= 1")
        if self.activation not in ACTIVATIONS:
            raise ValueError(f"activation must be one of {ACTIVATIONS}, got {self.activation!r}")

    @property
    def input_dim(self) -> int:
        return self.layer_sizes[0]

    @property
    def class_count(self) -> int:
        return self.layer_sizes[-1]


def param_count(spec: ModelSpec) -> int:
    """Total number of parameters: sum of n_in*n_out + n_out per layer."""
    sizes = spec.layer_sizes
    return sum(n_in * n_out + n_out for n_in, n_out in zip(sizes[:-1], sizes[1:]))


def init_params(spec: ModelSpec) -> np.ndarray:
    """Deterministic init: per layer, weights uniform on
    +/- sqrt(6 / (n_in + n_out)), biases zero."""
    rng = np.random.default_rng(spec.seed)
    chunks = []
    for n_in, n_out in zip(spec.layer_sizes[:-1], spec.layer_sizes[1:]):
        limit = np.sqrt(6.0 / (n_in + n_out))
        chunks.append(rng.uniform(-limit, limit, size=n_in * n_out))
        chunks.append(np.zeros(n_out))
    return np.concatenate(chunks)


def unpack_params(spec: ModelSpec, params: np.ndarray) -> list[tuple[np.ndarray, np.ndarray]]:
    """Slice the flat vector into per-layer (weights, bias) views."""
    params = np.asarray(params, dtype=np.float64)
    if params.ndim != 1 or params.shape[0] != param_count(spec):
        raise ValueError(
            f"parameter vector has length {params.shape}, "
            f"model needs {param_count(spec)}"
        )
    layers = []
    pos = 0
    for n_in, n_out in zip(spec.layer_sizes[:-1], spec.layer_sizes[1:]):
        w = params[pos:pos + n_in * n_out].reshape(n_in, n_out)
        pos += n_in * n_out
        b = params[pos:pos + n_out]
        pos += n_out
        layers.append((w, b))
    return layers


def _check_inputs(spec: ModelSpec, inputs: np.ndarray) -> np.ndarray:
    inputs = np.asarray(inputs, dtype=np.float64)
    if inputs.ndim != 2 or inputs.shape[1] != spec.input_dim:
        raise ValueError(
            f"inputs have shape {inputs.shape}, model expects (*, {spec.input_dim})"
        )
    return inputs


def _activate(z: np.ndarray, kind: str) -> np.ndarray:
    if kind == "relu":
        return np.maximum(z, 0.0)
    return np.tanh(z)


def _activate_grad(z: np.ndarray, kind: str) -> np.ndarray:
    if kind == "relu":
        return (z > 0.0).astype(np.float64)
    t = np.tanh(z)
    return 1.0 - t * t


def _forward_cached(spec, params, inputs):
    """Forward pass keeping pre-activations and activations for backprop."""
    layers = unpack_params(spec, params)
    acts = [inputs]
    zs = []
    a = inputs
    for i, (w, b) in enumerate(layers):
        z = a @ w + b
        zs.append(z)
        a = _activate(z, spec.activation) if i < len(layers) - 1 else z
        acts.append(a)
    return acts, zs


def forward(spec: ModelSpec, params: np.ndarray, inputs: np.ndarray) -> np.ndarray:
    """Logits matrix, shape (batch, class_count). Purely functional."""
    inputs = _check_inputs(spec, inputs)
    acts, _ = _forward_cached(spec, params, inputs)
    return acts[-1]


def _sum_left_to_right(values: np.ndarray) -> float:
    # Fixed left-to-right accumulation: the documented summation order.
    total = 0.0
    for v in values:
        total += float(v)
    return total


def _check_labels(labels: np.ndarray, class_count: int, batch: int) -> np.ndarray:
    labels = np.asarray(labels)
    if labels.ndim != 1 or labels.shape[0] != batch:
        raise ValueError(f"labels have shape {labels.shape}, expected ({batch},)")
    if labels.size and (labels.min() < 0 or labels.max() >= class_count):
        raise ValueError(f"labels must lie in [0, {class_count})")
    return labels.astype(np.int64)


def cross_entropy(logits: np.ndarray, labels: np.ndarray) -> float:
    """Batch mean of -log softmax(logits)[label], max-subtracted for stability."""
    logits = np.asarray(logits, dtype=np.float64)
    if logits.ndim != 2:
        raise ValueError(f"logits must be 2-d, got shape {logits.shape}")
    if logits.shape[0] == 0:
        raise ValueError("cross_entropy of an empty batch")
    labels = _check_labels(labels, logits.shape[1], logits.shape[0])
    m = logits.max(axis=1)
    # sum includes exp(0) = 1 for the max term, so log(...) >= 0 and the
    # per-sample loss is nonnegative in floating point as well.
    lse = m + np.log(np.exp(logits - m[:, None]).sum(axis=1))
    per_sample = lse - logits[np.arange(logits.shape[0]), labels]
    return _sum_left_to_right(per_sample) / logits.shape[0]


def loss(spec: ModelSpec, params: np.ndarray, inputs: np.ndarray, labels: np.ndarray) -> float:
    return cross_entropy(forward(spec, params, inputs), labels)


def backward(spec: ModelSpec, params: np.ndarray, inputs: np.ndarray,
             labels: np.ndarray) -> np.ndarray:
    """Gradient of the batch-mean cross-entropy w.r.t. the flat parameter vector."""
    inputs = _check_inputs(spec, inputs)
    if inputs.shape[0] == 0:
        raise ValueError("backward over an empty batch")
    labels = _check_labels(labels, spec.class_count, inputs.shape[0])
    acts, zs = _forward_cached(spec, params, inputs)
    n = inputs.shape[0]

    logits = acts[-1]
    m = logits.max(axis=1, keepdims=True)
    e = np.exp(logits - m)
    probs = e / e.sum(axis=1, keepdims=True)
    delta = probs
    delta[np.arange(n), labels] -= 1.0
    delta /= n

    layers = unpack_params(spec, params)
    grad_chunks: list[np.ndarray] = []
    for i in range(len(layers) - 1, -1, -1):
        w, _ = layers[i]
        gw = acts[i].T @ delta
        gb = delta.sum(axis=0)
        grad_chunks.append(gb)
        grad_chunks.append(gw.ravel())
        if i > 0:
            delta = (delta @ w.T) * _activate_grad(zs[i - 1], spec.activation)
    return np.concatenate(grad_chunks[::-1])


def finite_diff_grad(spec: ModelSpec, params: np.ndarray, inputs: np.ndarray,
                     labels: np.ndarray, step: float = 1e-6) -> np.ndarray:
    """Central-difference gradient, (L(w + s*e_j) - L(w - s*e_j)) / 2s per coordinate.

    Test oracle; O(d) loss evaluations, use on small models only.
    """
    if step <= 0:
        raise ValueError("step must be > 0")
    params = np.asarray(params, dtype=np.float64)
    grad = np.zeros_like(params)
    work = params.copy()
    for j in range(params.shape[0]):
        orig = work[j]
        work[j] = orig + step
        up = loss(spec, work, inputs, labels)
        work[j] = orig - step
        down = loss(spec, work, inputs, labels)
        work[j] = orig
        grad[j] = (up - down) / (2.0 * step)
    return grad


def evaluate(spec: ModelSpec, params: np.ndarray, inputs: np.ndarray,
             labels: np.ndarray) -> float:
    """Top-1 accuracy; argmax ties break toward the lowest class index."""
    inputs = _check_inputs(spec, inputs)
    if inputs.shape[0] == 0:
        raise ValueError("evaluate over an empty dataset")
    labels = _check_labels(labels, spec.class_count, inputs.shape[0])
    pred = np.argmax(forward(spec, params, inputs), axis=1)
    return float(np.mean(pred == labels))
