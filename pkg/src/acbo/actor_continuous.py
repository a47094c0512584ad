"""Squashed-Gaussian sampling policy over the open box (-1, 1)^d.

A design is generated as ``x = tanh(mu + sigma * xi)`` with ``xi ~ N(0, I)``,
where ``mu`` and ``log sigma`` are the two output heads of a network.  The
network input is either a constant vector of ones (single-modal) or a
per-sample standard normal vector (multi-modal).
"""
from __future__ import annotations

import math
from dataclasses import dataclass

import numpy as np

from .critic import Critic, encode
from .nn_core import (
    AdamState,
    NetworkSpec,
    ParamVector,
    ShapeError,
    adam_step,
    backward,
    backward_cached,
    forward,
    forward_cached,
    init_params,
)

LOG_SQRT_2PI = 0.5 * math.log(2.0 * math.pi)
NOISE_INPUTS = ("constant", "gaussian")


@dataclass(frozen=True, eq=False)
class ContinuousActor:
    params: ParamVector
    design_dim: int
    noise_dim: int = 1
    log_sigma_bounds: tuple[float, float] = (-5.0, 2.0)
    noise_input: str = "constant"

    def __post_init__(self):
        spec = self.params.spec
        if spec.n_out != 2 * self.design_dim:
            raise ShapeError("actor network output must be 2 * design_dim")
        if spec.n_in != self.noise_dim:
            raise ShapeError("actor network input must be noise_dim wide")
        if self.noise_input not in NOISE_INPUTS:
            raise ValueError(f"noise_input must be one of {NOISE_INPUTS}")
        lo, hi = self.log_sigma_bounds
        if not lo < hi:
            raise ValueError("log_sigma_bounds must be increasing")

    def with_params(self, params: ParamVector) -> "ContinuousActor":
        return ContinuousActor(params, self.design_dim, self.noise_dim,
                               self.log_sigma_bounds, self.noise_input)


@dataclass(frozen=True, eq=False)
class NoiseBatch:
    """Reparameterization noise ``xi`` (N, d) and network inputs ``z`` (N, noise_dim)."""
    xi: np.ndarray
    z: np.ndarray

    def __len__(self):
        return self.xi.shape[0]


def make_actor(design_dim: int, rng: np.random.Generator, hidden=(64, 64), activation="tanh",
               noise_dim: int = 1, noise_input: str = "constant",
               log_sigma_bounds=(-5.0, 2.0)) -> ContinuousActor:
    spec = NetworkSpec((noise_dim, *hidden, 2 * design_dim), activation)
    return ContinuousActor(init_params(spec, rng), design_dim, noise_dim,
                           tuple(log_sigma_bounds), noise_input)


def draw_noise(actor: ContinuousActor, rng: np.random.Generator, n: int) -> NoiseBatch:
    xi = rng.standard_normal((n, actor.design_dim))
    if actor.noise_input == "gaussian":
        z = rng.standard_normal((n, actor.noise_dim))
    else:
        z = np.ones((n, actor.noise_dim))
    return NoiseBatch(xi, z)


def as_noise(actor: ContinuousActor, noise) -> NoiseBatch:
    """Accept a NoiseBatch, or a bare ``xi`` array for constant-input actors."""
    if isinstance(noise, NoiseBatch):
        nb = noise
    else:
        xi = np.asarray(noise, dtype=np.float64)
        if xi.ndim == 1:
            xi = xi[None, :]
        if actor.noise_input != "constant":
            raise ValueError("gaussian-input actors need an explicit NoiseBatch")
        nb = NoiseBatch(xi, np.ones((xi.shape[0], actor.noise_dim)))
    if nb.xi.ndim != 2 or nb.xi.shape[1] != actor.design_dim:
        raise ShapeError(f"xi must have {actor.design_dim} columns, got shape {nb.xi.shape}")
    if nb.z.shape != (nb.xi.shape[0], actor.noise_dim):
        raise ShapeError("network input batch does not match xi batch")
    if len(nb) == 0:
        raise ValueError("noise batch is empty")
    return nb


def _raw_heads(actor, z):
    if actor.noise_input == "constant" and np.ndim(z) == 2 and len(z) > 1:
        # all rows share the constant input: evaluate once and broadcast
        mu, log_sigma, raw = _raw_heads(actor, z[:1])
        n = len(z)
        return (np.broadcast_to(mu, (n, mu.shape[1])), np.broadcast_to(log_sigma, (n, mu.shape[1])),
                np.broadcast_to(raw, (n, mu.shape[1])))
    out = forward(actor.params, z)
    d = actor.design_dim
    lo, hi = actor.log_sigma_bounds
    raw = out[..., d:]
    return out[..., :d], np.clip(raw, lo, hi), raw


def actor_heads(actor: ContinuousActor, noise_input) -> tuple[np.ndarray, np.ndarray]:
    """``(mu, sigma)`` for one network input vector (or a batch of them)."""
    mu, log_sigma, _ = _raw_heads(actor, noise_input)
    return mu, np.exp(log_sigma)


def log1m_tanh_sq(u):
    """``log(1 - tanh(u)**2)`` without cancellation for large ``|u|``."""
    # equals 2 * (log 2 - u - softplus(-2u)), written in |u| so exp never overflows
    a = np.abs(np.asarray(u, dtype=np.float64))
    return 2.0 * (math.log(2.0) - a - np.log1p(np.exp(-2.0 * a)))


def _pre_squash(actor, nb):
    mu, log_sigma, raw = _raw_heads(actor, nb.z)
    sigma = np.exp(log_sigma)
    return mu, log_sigma, raw, sigma, mu + sigma * nb.xi


def sample_design(actor: ContinuousActor, xi) -> np.ndarray:
    """``tanh(mu + sigma * xi)``; one row per noise sample."""
    nb = as_noise(actor, xi)
    *_, u = _pre_squash(actor, nb)
    x = np.tanh(u)
    # tanh rounds to +-1 in float64 once |u| > ~19; keep designs strictly inside the box
    x = np.clip(x, -np.nextafter(1.0, 0.0), np.nextafter(1.0, 0.0))
    return x[0] if np.ndim(xi) == 1 else x


def log_density(actor: ContinuousActor, xi) -> np.ndarray:
    """Log-density of the squashed design generated by ``xi``, along the sampling path."""
    nb = as_noise(actor, xi)
    _, log_sigma, _, _, u = _pre_squash(actor, nb)
    per_coord = -0.5 * nb.xi ** 2 - log_sigma - LOG_SQRT_2PI - log1m_tanh_sq(u)
    out = per_coord.sum(axis=-1)
    return out[0] if np.ndim(xi) == 1 else out


def density_on_grid(mu: float, sigma: float, x) -> np.ndarray:
    """1-d squashed-Gaussian density evaluated directly at ``x`` in (-1, 1)."""
    x = np.asarray(x, dtype=np.float64)
    u = np.arctanh(x)
    log_n = -0.5 * ((u - mu) / sigma) ** 2 - math.log(sigma) - LOG_SQRT_2PI
    return np.exp(log_n) / (1.0 - x * x)


def objective_estimate(actor: ContinuousActor, critic: Critic, noise, alpha: float) -> float:
    """Monte-Carlo estimate of E[Q(x) - alpha * log density(x)]."""
    if alpha < 0:
        raise ValueError("alpha must be nonnegative")
    nb = as_noise(actor, noise)
    x = sample_design(actor, nb)
    q = forward(critic.params, encode(critic, x))[:, 0]
    return float(np.mean(q - alpha * log_density(actor, nb)))


def objective_and_grad(actor: ContinuousActor, critic: Critic, noise,
                       alpha: float) -> tuple[float, np.ndarray]:
    """Estimate and its exact gradient w.r.t. the actor parameters (noise held fixed).

    Gradients flow through the design into the (frozen) critic and through
    both the design and sigma into the log-density term.
    """
    if alpha < 0:
        raise ValueError("alpha must be nonnegative")
    nb = as_noise(actor, noise)
    n = len(nb)
    mu, log_sigma, raw, sigma, u = _pre_squash(actor, nb)
    x = np.tanh(u)
    q, cache = forward_cached(critic.params, encode(critic, x))
    q = q[:, 0]
    _, dq_dx = backward_cached(cache, np.ones((n, 1)))

    logp = (-0.5 * nb.xi ** 2 - log_sigma - LOG_SQRT_2PI - log1m_tanh_sq(u)).sum(axis=-1)
    value = float(np.mean(q - alpha * logp))

    # d/du of -alpha * (-log(1 - tanh^2 u)) is -2 alpha tanh(u)
    dJ_du = (dq_dx * (1.0 - x * x) - 2.0 * alpha * x) / n
    d_mu = dJ_du
    d_log_sigma = dJ_du * sigma * nb.xi + alpha / n
    lo, hi = actor.log_sigma_bounds
    d_log_sigma = d_log_sigma * ((raw > lo) & (raw < hi))

    out_grad = np.concatenate([d_mu, d_log_sigma], axis=1)
    if actor.noise_input == "constant":
        # every row shares one network input, so one backward pass suffices
        grad, _ = backward(actor.params, nb.z[:1], out_grad.sum(axis=0, keepdims=True))
    else:
        grad, _ = backward(actor.params, nb.z, out_grad)
    return value, grad


def actor_update_continuous(actor: ContinuousActor, critic: Critic, noise, alpha: float,
                            opt: AdamState, lr: float) -> tuple[ContinuousActor, AdamState, float]:
    """One Adam ascent step on the entropy-regularized objective.

    Returns the new actor, optimizer state, and the objective estimate before the step.
    """
    value, grad = objective_and_grad(actor, critic, noise, alpha)
    opt, params = adam_step(opt, actor.params, -grad, lr)
    return actor.with_params(params), opt, value
