"""Softmax policy over a finite design set, plus its closed-form optimum."""
from __future__ import annotations

from dataclasses import dataclass

import numpy as np
from scipy.special import logsumexp, softmax, xlogy

from .critic import Critic, predict_many
from .nn_core import (
    AdamState,
    NetworkSpec,
    ParamVector,
    ShapeError,
    adam_step,
    backward,
    forward,
    init_params,
)

_ONE = np.ones(1)


@dataclass(frozen=True, eq=False)
class DiscreteActor:
    params: ParamVector
    n_designs: int

    def __post_init__(self):
        if self.params.spec.n_out != self.n_designs:
            raise ShapeError("actor network output width must equal n_designs")
        if self.params.spec.n_in != 1:
            raise ShapeError("discrete actor takes the constant scalar input 1")


def make_discrete_actor(n_designs: int, rng: np.random.Generator, hidden=(64, 64),
                        activation="tanh") -> DiscreteActor:
    spec = NetworkSpec((1, *hidden, n_designs), activation)
    return DiscreteActor(init_params(spec, rng), n_designs)


def check_probability_vector(p, tol: float = 1e-12) -> np.ndarray:
    p = np.asarray(p, dtype=np.float64)
    if p.ndim != 1 or p.size == 0:
        raise ShapeError("probability vector must be 1-d and nonempty")
    if np.any(p <= 0) or abs(p.sum() - 1.0) > tol:
        raise ValueError("not a strictly positive normalized probability vector")
    return p


def logits(actor: DiscreteActor) -> np.ndarray:
    return forward(actor.params, _ONE)


def design_distribution(actor: DiscreteActor) -> np.ndarray:
    return softmax(logits(actor))


def discrete_objective(P, Q_values, alpha: float) -> float:
    """Expected score plus ``alpha`` times the entropy of ``P``."""
    P = np.asarray(P, dtype=np.float64)
    Q = np.asarray(Q_values, dtype=np.float64)
    if P.shape != Q.shape:
        raise ShapeError("P and Q must have equal length")
    if alpha < 0:
        raise ValueError("alpha must be nonnegative")
    return float(np.sum(P * Q) - alpha * np.sum(xlogy(P, P)))


def logit_gradient(P, Q_values, alpha: float) -> np.ndarray:
    """Gradient of the objective w.r.t. the softmax logits.

    Sums dP(x)/dlogit * (Q(x) - alpha log P(x) - alpha) over all designs; the
    constant ``-alpha`` contributes nothing because the columns of dP/dlogit
    sum to zero, but it is kept so the bracket reads as the full derivative.
    """
    P = np.asarray(P, dtype=np.float64)
    log_p = np.log(np.maximum(P, np.finfo(np.float64).tiny))
    B = np.asarray(Q_values, dtype=np.float64) - alpha * log_p - alpha
    return P * (B - np.dot(P, B))


def objective_and_grad(actor: DiscreteActor, Q_values, alpha: float) -> tuple[float, np.ndarray]:
    P = design_distribution(actor)
    g_logits = logit_gradient(P, Q_values, alpha)
    grad, _ = backward(actor.params, _ONE, g_logits)
    return discrete_objective(P, Q_values, alpha), grad


def actor_update_discrete(actor: DiscreteActor, critic: Critic, alpha: float, opt: AdamState,
                          lr: float) -> tuple[DiscreteActor, AdamState, float]:
    """One exact ascent step; the critic is evaluated on every design.

    Returns the new actor, optimizer state, and the objective before the step.
    """
    if critic.input_dim != actor.n_designs or not critic.discrete:
        raise ShapeError("critic must score all designs of the actor via one-hot inputs")
    Q = predict_many(critic, np.arange(actor.n_designs))
    value, grad = objective_and_grad(actor, Q, alpha)
    opt, params = adam_step(opt, actor.params, -grad, lr)
    return DiscreteActor(params, actor.n_designs), opt, value


def optimal_distribution(Q_values, alpha: float) -> np.ndarray:
    """Energy-based maximizer ``exp(Q/alpha) / sum exp(Q/alpha)``."""
    if not alpha > 0:
        raise ValueError("alpha must be strictly positive")
    return softmax(np.asarray(Q_values, dtype=np.float64) / alpha)


def optimal_value(Q_values, alpha: float) -> float:
    """Objective value attained by ``optimal_distribution``: ``alpha * logsumexp(Q/alpha)``."""
    return float(alpha * logsumexp(np.asarray(Q_values, dtype=np.float64) / alpha))


def total_variation(p, q) -> float:
    return 0.5 * float(np.abs(np.asarray(p) - np.asarray(q)).sum())
