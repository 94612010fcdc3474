"""Fully connected feed-forward network with hand-written backpropagation.

Hidden layers apply ``sigma(W z + b)``; the output layer is linear.  All
parameters live in one flat float64 buffer so the optimizer can update them
with a handful of vectorized operations; ``weights`` and ``biases`` are views
into that buffer.
"""

import json
from dataclasses import dataclass, field

import numpy as np

from .errors import ConfigError, DataError, ShapeError, TrainingError

ACTIVATIONS = ("relu", "tanh")
CHECKPOINT_VERSION = 1


class Mlp:
    def __init__(self, layer_dims, activation="relu", params=None):
        layer_dims = [int(d) for d in layer_dims]
        if len(layer_dims) < 2 or min(layer_dims) < 1:
            raise ConfigError(f"layer_dims needs at least two positive entries, got {layer_dims}")
        if activation not in ACTIVATIONS:
            raise ConfigError(f"unknown activation {activation!r}; choose from {ACTIVATIONS}")
        self.layer_dims = tuple(layer_dims)
        self.activation = activation
        self._slices = []
        offset = 0
        for fan_in, fan_out in zip(layer_dims[:-1], layer_dims[1:]):
            w = slice(offset, offset + fan_out * fan_in)
            offset = w.stop
            b = slice(offset, offset + fan_out)
            offset = b.stop
            self._slices.append((w, b, (fan_out, fan_in)))
        if params is None:
            params = np.zeros(offset)
        params = np.array(params, dtype=np.float64).reshape(-1)
        if params.shape[0] != offset:
            raise ShapeError(f"expected {offset} parameters, got {params.shape[0]}")
        self.params = params
        self.weights, self.biases = self.split(self.params)

    @property
    def n_layers(self):
        return len(self._slices)

    @property
    def n_params(self):
        return self.params.shape[0]

    def split(self, flat):
        """Views of a flat parameter-shaped array as (weights, biases) lists."""
        weights = [flat[w].reshape(shape) for w, _, shape in self._slices]
        biases = [flat[b] for _, b, _ in self._slices]
        return weights, biases

    def copy(self):
        return Mlp(self.layer_dims, self.activation, self.params.copy())

    def __call__(self, x):
        return forward(self, x)[0]

    def __repr__(self):
        return f"Mlp(layer_dims={list(self.layer_dims)}, activation={self.activation!r})"


@dataclass
class ForwardTrace:
    inputs: np.ndarray
    pre: list = field(default_factory=list)
    post: list = field(default_factory=list)


def init_mlp(layer_dims, activation="relu", seed=0):
    """Uniform(-r, r) weights with r = sqrt(6 / (fan_in + fan_out)), zero biases."""
    net = Mlp(layer_dims, activation)
    rng = np.random.default_rng(seed)
    for W in net.weights:
        fan_out, fan_in = W.shape
        bound = np.sqrt(6.0 / (fan_in + fan_out))
        W[...] = rng.uniform(-bound, bound, size=W.shape)
    return net


def forward(net, x):
    x = np.asarray(x, dtype=np.float64)
    if x.ndim == 1:
        x = x[None, :]
    if x.shape[1] != net.layer_dims[0]:
        raise ShapeError(f"input has {x.shape[1]} columns, network expects {net.layer_dims[0]}")
    if not np.isfinite(x).all():
        raise DataError("non-finite network input")
    trace = ForwardTrace(inputs=x)
    a = x
    last = net.n_layers - 1
    for l, (W, b) in enumerate(zip(net.weights, net.biases)):
        z = a @ W.T + b
        trace.pre.append(z)
        if l < last:
            a = np.maximum(z, 0.0) if net.activation == "relu" else np.tanh(z)
        else:
            a = z
        trace.post.append(a)
    return a, trace


def backward(net, trace, grad_output):
    """Gradient of a scalar loss w.r.t. all parameters, as a flat array.

    ``grad_output`` holds dLoss/dy_hat with one row per sample of the traced
    batch.  Use ``net.split`` to view the result per layer.
    """
    delta = np.asarray(grad_output, dtype=np.float64)
    if delta.ndim == 1:
        delta = delta[None, :]
    if delta.shape != trace.post[-1].shape:
        raise ShapeError(f"upstream gradient {delta.shape} does not match output {trace.post[-1].shape}")
    grad = np.empty(net.n_params)
    gW, gb = net.split(grad)
    for l in range(net.n_layers - 1, -1, -1):
        a_prev = trace.post[l - 1] if l > 0 else trace.inputs
        gW[l][...] = delta.T @ a_prev
        gb[l][...] = delta.sum(axis=0)
        if l > 0:
            delta = delta @ net.weights[l]
            if net.activation == "relu":
                delta = delta * (trace.pre[l - 1] > 0.0)
            else:
                delta = delta * (1.0 - trace.post[l - 1] ** 2)
    return grad


@dataclass
class AdamState:
    m: np.ndarray
    v: np.ndarray
    step: int = 0
    lr: float = 1e-4
    beta1: float = 0.9
    beta2: float = 0.999
    eps: float = 1e-8

    @classmethod
    def for_net(cls, net, lr=1e-4, beta1=0.9, beta2=0.999, eps=1e-8):
        return cls(np.zeros(net.n_params), np.zeros(net.n_params), 0, lr, beta1, beta2, eps)


def adam_step(state, net, grad, batch=None):
    """One bias-corrected Adam update of ``net.params`` in place; returns ``net``."""
    if grad.shape != net.params.shape:
        raise ShapeError(f"gradient has {grad.shape[0]} entries, network has {net.n_params}")
    if not np.isfinite(grad).all():
        raise TrainingError(f"non-finite gradient at batch {batch}", batch=batch)
    state.step += 1
    b1, b2 = state.beta1, state.beta2
    state.m *= b1
    state.m += (1.0 - b1) * grad
    state.v *= b2
    state.v += (1.0 - b2) * grad * grad
    step_size = state.lr / (1.0 - b1 ** state.step)
    denom = np.sqrt(state.v / (1.0 - b2 ** state.step)) + state.eps
    net.params -= step_size * state.m / denom
    return net


def save_checkpoint(path, net, meta=None):
    """Write parameters and metadata to an ``.npz`` file (bit-exact)."""
    with open(path, "wb") as fh:
        np.savez(
            fh,
            format_version=np.array(CHECKPOINT_VERSION),
            layer_dims=np.array(net.layer_dims, dtype=np.int64),
            activation=np.array(net.activation),
            params=net.params,
            meta=np.array(json.dumps(meta or {}, sort_keys=True)),
        )


def load_checkpoint(path):
    with np.load(path, allow_pickle=False) as f:
        version = int(f["format_version"])
        if version != CHECKPOINT_VERSION:
            raise DataError(f"unsupported checkpoint version {version}")
        net = Mlp(f["layer_dims"].tolist(), str(f["activation"]), f["params"].copy())
        meta = json.loads(str(f["meta"]))
    return net, meta
