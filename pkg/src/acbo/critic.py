"""Neural surrogate of the black-box score, fitted by squared-error regression."""
from __future__ import annotations

from dataclasses import dataclass
from typing import Sequence

import numpy as np

from .nn_core import (
    AdamState,
    NetworkSpec,
    ParamVector,
    ShapeError,
    adam_step,
    backward_cached,
    forward,
    forward_cached,
    init_params,
)


@dataclass(frozen=True)
class ScoredDesign:
    design: object  # float vector (continuous) or int index (discrete)
    score: float

    def __post_init__(self):
        if not np.isfinite(self.score):
            raise ValueError(f"score must be finite, got {self.score}")


@dataclass(frozen=True, eq=False)
class Critic:
    params: ParamVector
    input_dim: int
    discrete: bool = False

    def __post_init__(self):
        if self.params.spec.n_out != 1:
            raise ShapeError("critic network must have a single output")
        if self.params.spec.n_in != self.input_dim:
            raise ShapeError("critic network input width differs from input_dim")


def make_critic(input_dim: int, rng: np.random.Generator, hidden=(64, 64),
                activation="tanh", discrete: bool = False) -> Critic:
    spec = NetworkSpec((input_dim, *hidden, 1), activation)
    return Critic(init_params(spec, rng), input_dim, discrete)


def encode(critic: Critic, designs) -> np.ndarray:
    """Network inputs for one design or a sequence of designs (2-D result)."""
    if critic.discrete:
        idx = np.atleast_1d(np.asarray(designs, dtype=np.int64))
        if idx.ndim != 1 or np.any(idx < 0) or np.any(idx >= critic.input_dim):
            raise ShapeError(f"design index out of range for {critic.input_dim} designs")
        out = np.zeros((idx.size, critic.input_dim))
        out[np.arange(idx.size), idx] = 1.0
        return out
    x = np.asarray(designs, dtype=np.float64)
    if x.ndim == 1:
        x = x.reshape(1, -1) if x.size == critic.input_dim else x.reshape(-1, 1)
    if x.ndim != 2 or x.shape[1] != critic.input_dim:
        raise ShapeError(f"expected designs of dimension {critic.input_dim}, got shape {x.shape}")
    return x


def predict(critic: Critic, x) -> float:
    return float(forward(critic.params, encode(critic, x))[0, 0])


def predict_many(critic: Critic, designs) -> np.ndarray:
    return forward(critic.params, encode(critic, designs))[:, 0]


def _stack(critic, batch: Sequence[ScoredDesign]):
    if len(batch) == 0:
        raise ValueError("critic batch is empty")
    X = encode(critic, [s.design for s in batch])
    y = np.array([s.score for s in batch], dtype=np.float64)
    return X, y


def critic_loss(critic: Critic, batch: Sequence[ScoredDesign]) -> float:
    """Half the mean squared residual over the batch."""
    X, y = _stack(critic, batch)
    r = forward(critic.params, X)[:, 0] - y
    return 0.5 * float(np.mean(r * r))


def critic_loss_grad(critic: Critic, batch: Sequence[ScoredDesign]) -> tuple[float, np.ndarray]:
    X, y = _stack(critic, batch)
    out, cache = forward_cached(critic.params, X)
    r = out[:, 0] - y
    grad, _ = backward_cached(cache, r[:, None] / len(y))
    return 0.5 * float(np.mean(r * r)), grad


def critic_update(critic: Critic, batch: Sequence[ScoredDesign], opt: AdamState,
                  lr: float) -> tuple[Critic, AdamState, float]:
    """One Adam step on the regression loss.

    Returns the new critic, optimizer state, and the loss *before* the step.
    """
    loss, grad = critic_loss_grad(critic, batch)
    opt, params = adam_step(opt, critic.params, grad, lr)
    return Critic(params, critic.input_dim, critic.discrete), opt, loss
