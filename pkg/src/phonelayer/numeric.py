"""Small dense encoder with exact backprop, SGD, and a stable log-softmax.

Matrices are float64 numpy arrays. An encoder is a stack of affine layers,
each with a ``tanh`` or ``linear`` activation; at most one layer may carry an
Elman recurrence ``h_t = act(W x_t + U h_{t-1} + b)``.
"""

from __future__ import annotations

from dataclasses import dataclass, field
from typing import Sequence

import numpy as np

ACTIVATIONS = ("tanh", "linear")
INIT_SCALE = 0.1


class ShapeError(ValueError):
    pass


@dataclass(frozen=True)
class Utterance:
    features: np.ndarray

    def __post_init__(self):
        feats = np.array(self.features, dtype=np.float64)
        if feats.ndim != 2 or feats.shape[0] < 1 or feats.shape[1] < 1:
            raise ShapeError(f"features must be a non-empty T x D matrix, got shape {feats.shape}")
        if not np.isfinite(feats).all():
            raise ShapeError("features contain non-finite values")
        object.__setattr__(self, "features", feats)

    @property
    def frames(self) -> int:
        return self.features.shape[0]

    @property
    def feature_dim(self) -> int:
        return self.features.shape[1]


@dataclass
class Layer:
    weight: np.ndarray  # (out, in)
    bias: np.ndarray  # (out,)
    activation: str = "tanh"
    recurrent: np.ndarray | None = None  # (out, out)

    def __post_init__(self):
        if self.activation not in ACTIVATIONS:
            raise ValueError(f"unknown activation {self.activation!r}")
        self.weight = np.asarray(self.weight, dtype=np.float64)
        self.bias = np.asarray(self.bias, dtype=np.float64)
        out = self.weight.shape[0]
        if self.weight.ndim != 2 or self.bias.shape != (out,):
            raise ShapeError(f"bias shape {self.bias.shape} does not match weight {self.weight.shape}")
        if self.recurrent is not None:
            self.recurrent = np.asarray(self.recurrent, dtype=np.float64)
            if self.recurrent.shape != (out, out):
                raise ShapeError(f"recurrent weights must be {out}x{out}")

    @property
    def input_dim(self) -> int:
        return self.weight.shape[1]

    @property
    def output_dim(self) -> int:
        return self.weight.shape[0]

    def arrays(self) -> list[np.ndarray]:
        arrs = [self.weight, self.bias]
        if self.recurrent is not None:
            arrs.append(self.recurrent)
        return arrs


@dataclass
class EncoderParams:
    layers: list[Layer]
    seed: int | None = None

    def __post_init__(self):
        if not self.layers:
            raise ShapeError("encoder needs at least one layer")
        for a, b in zip(self.layers, self.layers[1:]):
            if a.output_dim != b.input_dim:
                raise ShapeError(f"layer dims disagree: {a.output_dim} -> {b.input_dim}")
        if sum(layer.recurrent is not None for layer in self.layers) > 1:
            raise ShapeError("at most one recurrent layer is supported")

    @property
    def input_dim(self) -> int:
        return self.layers[0].input_dim

    @property
    def output_dim(self) -> int:
        return self.layers[-1].output_dim

    def arrays(self) -> list[np.ndarray]:
        return [a for layer in self.layers for a in layer.arrays()]

    def with_arrays(self, arrays: Sequence[np.ndarray]) -> "EncoderParams":
        it = iter(arrays)
        layers = []
        for layer in self.layers:
            w, b = next(it), next(it)
            r = next(it) if layer.recurrent is not None else None
            layers.append(Layer(w.copy(), b.copy(), layer.activation, None if r is None else r.copy()))
        return EncoderParams(layers, self.seed)


def init_layer(rng: np.random.Generator, n_in: int, n_out: int, activation="tanh", recurrent=False) -> Layer:
    u = lambda *shape: rng.uniform(-INIT_SCALE, INIT_SCALE, size=shape)
    return Layer(u(n_out, n_in), u(n_out), activation, u(n_out, n_out) if recurrent else None)


def init_encoder(
    input_dim: int,
    hidden: Sequence[int],
    output_dim: int | None,
    seed: int,
    recurrent_layer: int | None = None,
) -> EncoderParams:
    """Seeded uniform[-0.1, 0.1] init of ``tanh`` hidden layers plus a linear output.

    ``output_dim=None`` builds a trunk without output projection (the last
    hidden layer is the output). ``recurrent_layer`` indexes the hidden layer
    that gets an Elman recurrence.
    """
    rng = np.random.default_rng(seed)
    dims = [input_dim, *hidden]
    layers = [
        init_layer(rng, dims[i], dims[i + 1], "tanh", recurrent=(i == recurrent_layer))
        for i in range(len(hidden))
    ]
    if output_dim is not None:
        layers.append(init_layer(rng, dims[-1], output_dim, "linear"))
    return EncoderParams(layers, seed)


@dataclass
class EncoderCache:
    params_id: int
    inputs: list[np.ndarray] = field(default_factory=list)
    outputs: list[np.ndarray] = field(default_factory=list)


def _layer_forward(layer: Layer, x: np.ndarray) -> np.ndarray:
    pre = x @ layer.weight.T + layer.bias
    if layer.recurrent is None:
        return np.tanh(pre) if layer.activation == "tanh" else pre
    out = np.empty_like(pre)
    prev = np.zeros(layer.output_dim)
    for t in range(pre.shape[0]):
        z = pre[t] + layer.recurrent @ prev
        prev = np.tanh(z) if layer.activation == "tanh" else z
        out[t] = prev
    return out


def encoder_forward(params: EncoderParams, utt: Utterance | np.ndarray) -> tuple[np.ndarray, EncoderCache]:
    x = utt.features if isinstance(utt, Utterance) else np.asarray(utt, dtype=np.float64)
    if x.ndim != 2 or x.shape[1] != params.input_dim:
        raise ShapeError(f"feature dim {x.shape[-1]} does not match encoder input {params.input_dim}")
    cache = EncoderCache(id(params))
    for layer in params.layers:
        cache.inputs.append(x)
        x = _layer_forward(layer, x)
        cache.outputs.append(x)
    return x, cache


def encoder_backward(
    params: EncoderParams, cache: EncoderCache, grad_out: np.ndarray
) -> tuple[EncoderParams, np.ndarray]:
    """Backprop ``grad_out`` (T x out) through the encoder.

    Returns gradients packed as an :class:`EncoderParams` of the same shapes,
    and the gradient with respect to the input features.
    """
    if cache.params_id != id(params) or len(cache.outputs) != len(params.layers):
        raise ShapeError("encoder cache does not belong to these parameters")
    grad = np.asarray(grad_out, dtype=np.float64)
    if grad.shape != cache.outputs[-1].shape:
        raise ShapeError(f"grad shape {grad.shape} != output shape {cache.outputs[-1].shape}")
    grads: list[Layer] = []
    for layer, x, y in zip(reversed(params.layers), reversed(cache.inputs), reversed(cache.outputs)):
        dact = (1.0 - y * y) if layer.activation == "tanh" else np.ones_like(y)
        if layer.recurrent is None:
            dpre = grad * dact
            d_rec = None
        else:
            dpre = np.zeros_like(grad)
            d_rec = np.zeros_like(layer.recurrent)
            carry = np.zeros(layer.output_dim)
            for t in range(grad.shape[0] - 1, -1, -1):
                dz = (grad[t] + carry) * dact[t]
                dpre[t] = dz
                if t > 0:
                    d_rec += np.outer(dz, y[t - 1])
                carry = layer.recurrent.T @ dz
        grads.append(Layer(dpre.T @ x, dpre.sum(axis=0), layer.activation, d_rec))
        grad = dpre @ layer.weight
    grads.reverse()
    return EncoderParams(grads, params.seed), grad


def sgd_step(params, grads, learning_rate: float):
    """``p - lr * g`` for an :class:`EncoderParams` or a list of arrays."""
    if isinstance(params, EncoderParams):
        return params.with_arrays(sgd_step(params.arrays(), grads.arrays(), learning_rate))
    if len(params) != len(grads):
        raise ShapeError(f"{len(params)} parameters but {len(grads)} gradients")
    updated = []
    for p, g in zip(params, grads):
        if p.shape != g.shape:
            raise ShapeError(f"parameter shape {p.shape} != gradient shape {g.shape}")
        updated.append(p - learning_rate * g)
    return updated


def log_softmax(v: np.ndarray, axis: int = -1) -> np.ndarray:
    v = np.asarray(v, dtype=np.float64)
    shifted = v - v.max(axis=axis, keepdims=True)
    return shifted - np.log(np.exp(shifted).sum(axis=axis, keepdims=True))


def logsumexp(v: np.ndarray, axis: int | None = None) -> np.ndarray:
    v = np.asarray(v, dtype=np.float64)
    m = np.max(v, axis=axis, keepdims=True)
    m = np.where(np.isfinite(m), m, 0.0)
    out = np.log(np.sum(np.exp(v - m), axis=axis, keepdims=True)) + m
    return np.squeeze(out, axis=axis) if axis is not None else out.reshape(())
