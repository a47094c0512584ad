"""Small feedforward networks on flat float64 parameter vectors.

Parameters for a network with widths ``[n0, n1, ..., nL]`` are stored as one
flat vector: for every layer the weight matrix ``W`` of shape ``(n_in, n_out)``
(row-major) followed by its bias ``b`` of shape ``(n_out,)``.  ``forward`` and
``backward`` accept either a single input vector or a ``(batch, n0)`` matrix;
parameter gradients of a batch are summed over rows.
"""
from __future__ import annotations

from dataclasses import dataclass

import numpy as np

ACTIVATIONS = ("tanh", "relu", "identity")


class ShapeError(ValueError):
    """Raised when an array does not match the network it is used with."""


@dataclass(frozen=True)
class NetworkSpec:
    layer_widths: tuple[int, ...]
    activation: tuple[str, ...] | str = "tanh"
    output_activation: str = "identity"

    def __post_init__(self):
        widths = tuple(int(w) for w in self.layer_widths)
        if len(widths) < 2:
            raise ValueError("layer_widths needs at least input and output widths")
        if any(w < 1 for w in widths):
            raise ValueError(f"layer widths must be positive, got {widths}")
        acts = self.activation
        if isinstance(acts, str):
            acts = (acts,) * (len(widths) - 2)
        acts = tuple(acts)
        if len(acts) != len(widths) - 2:
            raise ValueError("need one activation per hidden layer")
        for a in acts:
            if a not in ACTIVATIONS:
                raise ValueError(f"unknown activation {a!r}")
        if self.output_activation != "identity":
            raise ValueError("only identity output activation is supported")
        object.__setattr__(self, "layer_widths", widths)
        object.__setattr__(self, "activation", acts)

    @property
    def n_params(self) -> int:
        w = self.layer_widths
        return sum((a + 1) * b for a, b in zip(w[:-1], w[1:]))

    @property
    def n_in(self) -> int:
        return self.layer_widths[0]

    @property
    def n_out(self) -> int:
        return self.layer_widths[-1]

    def layer_activations(self) -> tuple[str, ...]:
        return self.activation + (self.output_activation,)


@dataclass(frozen=True, eq=False)
class ParamVector:
    values: np.ndarray
    spec: NetworkSpec

    def __post_init__(self):
        v = np.asarray(self.values, dtype=np.float64)
        if v.ndim != 1 or v.size != self.spec.n_params:
            raise ShapeError(f"expected {self.spec.n_params} parameters, got shape {v.shape}")
        if not np.all(np.isfinite(v)):
            raise ValueError("parameters must be finite")
        object.__setattr__(self, "values", v)

    def layers(self) -> list[tuple[np.ndarray, np.ndarray]]:
        """(W, b) views into ``values``, one pair per layer."""
        return _unflatten(self.values, self.spec)

    def with_values(self, values: np.ndarray) -> "ParamVector":
        return ParamVector(values, self.spec)


def _unflatten(flat: np.ndarray, spec: NetworkSpec) -> list[tuple[np.ndarray, np.ndarray]]:
    out = []
    i = 0
    w = spec.layer_widths
    for a, b in zip(w[:-1], w[1:]):
        W = flat[i:i + a * b].reshape(a, b)
        i += a * b
        out.append((W, flat[i:i + b]))
        i += b
    return out


def init_params(spec: NetworkSpec, rng: np.random.Generator) -> ParamVector:
    """Glorot-uniform weights, zero biases."""
    flat = np.zeros(spec.n_params)
    for W, _ in _unflatten(flat, spec):
        limit = np.sqrt(6.0 / (W.shape[0] + W.shape[1]))
        W[...] = rng.uniform(-limit, limit, size=W.shape)
    return ParamVector(flat, spec)


def zero_params(spec: NetworkSpec) -> ParamVector:
    return ParamVector(np.zeros(spec.n_params), spec)


def zero_output_layer(params: ParamVector) -> ParamVector:
    """Copy of ``params`` whose last layer weights and bias are zero."""
    flat = params.values.copy()
    W, b = _unflatten(flat, params.spec)[-1]
    W[...] = 0.0
    b[...] = 0.0
    return ParamVector(flat, params.spec)


def _act(name, z):
    if name == "tanh":
        return np.tanh(z)
    if name == "relu":
        return np.maximum(z, 0.0)
    return z


def _act_grad(name, z, h):
    if name == "tanh":
        return 1.0 - h * h
    if name == "relu":
        return (z > 0).astype(np.float64)
    return None


def _as_batch(x, width):
    x = np.asarray(x, dtype=np.float64)
    single = x.ndim == 1
    if single:
        x = x[None, :]
    if x.ndim != 2 or x.shape[1] != width:
        raise ShapeError(f"expected input width {width}, got shape {x.shape}")
    return x, single


def forward(params: ParamVector, x) -> np.ndarray:
    h, single = _as_batch(x, params.spec.n_in)
    if not np.all(np.isfinite(h)):
        raise ValueError("network input must be finite")
    for (W, b), act in zip(params.layers(), params.spec.layer_activations()):
        h = _act(act, h @ W + b)
    return h[0] if single else h


@dataclass(frozen=True, eq=False)
class ForwardCache:
    """Intermediate values of one forward pass, reused by ``backward_cached``."""
    params: ParamVector
    inputs: list
    pre: list
    post: list
    single: bool


def forward_cached(params: ParamVector, x) -> tuple[np.ndarray, ForwardCache]:
    h, single = _as_batch(x, params.spec.n_in)
    if not np.all(np.isfinite(h)):
        raise ValueError("network input must be finite")
    inputs, pre, post = [], [], []
    for (W, b), act in zip(params.layers(), params.spec.layer_activations()):
        inputs.append(h)
        z = h @ W + b
        h = _act(act, z)
        pre.append(z)
        post.append(h)
    return (h[0] if single else h), ForwardCache(params, inputs, pre, post, single)


def backward_cached(cache: ForwardCache, output_grad) -> tuple[np.ndarray, np.ndarray]:
    params = cache.params
    spec = params.spec
    g, _ = _as_batch(output_grad, spec.n_out)
    if g.shape[0] != cache.inputs[0].shape[0]:
        raise ShapeError("output_grad batch size differs from input batch size")
    layers = params.layers()
    acts = spec.layer_activations()
    grad = np.empty(spec.n_params)
    grad_layers = _unflatten(grad, spec)
    for k in range(len(layers) - 1, -1, -1):
        d = _act_grad(acts[k], cache.pre[k], cache.post[k])
        if d is not None:
            g = g * d
        gW, gb = grad_layers[k]
        np.matmul(cache.inputs[k].T, g, out=gW)
        gb[...] = g.sum(axis=0)
        g = g @ layers[k][0].T
    return grad, (g[0] if cache.single else g)


def backward(params: ParamVector, x, output_grad) -> tuple[np.ndarray, np.ndarray]:
    """Reverse-mode gradients of ``sum(output_grad * forward(params, x))``.

    Returns ``(param_grad, input_grad)``; ``param_grad`` is flat and summed
    over the batch, ``input_grad`` has the shape of ``x``.
    """
    _, cache = forward_cached(params, x)
    return backward_cached(cache, output_grad)


@dataclass(frozen=True, eq=False)
class AdamState:
    first_moment: np.ndarray
    second_moment: np.ndarray
    step_count: int = 0
    beta1: float = 0.9
    beta2: float = 0.999
    epsilon: float = 1e-8

    @classmethod
    def fresh(cls, n: int, **kw) -> "AdamState":
        return cls(np.zeros(n), np.zeros(n), 0, **kw)

    @classmethod
    def for_params(cls, params: ParamVector, **kw) -> "AdamState":
        return cls.fresh(params.spec.n_params, **kw)


def adam_step(state: AdamState, params: ParamVector, grad, lr: float) -> tuple[AdamState, ParamVector]:
    """One bias-corrected Adam descent step. Pass ``-grad`` to ascend."""
    grad = np.asarray(grad, dtype=np.float64)
    if grad.shape != params.values.shape or state.first_moment.shape != grad.shape:
        raise ShapeError("gradient, moments and parameters must have equal length")
    if not lr > 0:
        raise ValueError(f"learning rate must be positive, got {lr}")
    if not np.all(np.isfinite(grad)):
        raise ValueError("gradient has non-finite entries")
    t = state.step_count + 1
    b1, b2 = state.beta1, state.beta2
    m = state.first_moment * b1
    m += (1.0 - b1) * grad
    v = state.second_moment * b2
    v += (1.0 - b2) * (grad * grad)
    denom = np.sqrt(v / (1.0 - b2 ** t))
    denom += state.epsilon
    step = m * (lr / (1.0 - b1 ** t))
    step /= denom
    new = params.values - step
    return (
        AdamState(m, v, t, state.beta1, state.beta2, state.epsilon),
        ParamVector(new, params.spec),
    )
