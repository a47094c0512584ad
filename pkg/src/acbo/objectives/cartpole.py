"""Cart-pole balancing task scored as a black box over linear threshold policies.

Dynamics and constants follow the classic cart-pole benchmark (Euler
integration, 0.02 s step, failure beyond 12 degrees or 2.4 m).
"""
from __future__ import annotations

import math
from dataclasses import dataclass

import numpy as np

GRAVITY = 9.8
CART_MASS = 1.0
POLE_MASS = 0.1
TOTAL_MASS = CART_MASS + POLE_MASS
HALF_LENGTH = 0.5
POLE_MASS_LENGTH = POLE_MASS * HALF_LENGTH
FORCE_MAG = 10.0
TAU = 0.02
ANGLE_LIMIT = 12 * 2 * math.pi / 360
POSITION_LIMIT = 2.4
MAX_STEPS = 200
POLICY_SCALE = 5.0
POLICY_DIM = 5


@dataclass(frozen=True)
class CartPoleState:
    x: float
    x_dot: float
    theta: float
    theta_dot: float

    def as_array(self) -> np.ndarray:
        return np.array([self.x, self.x_dot, self.theta, self.theta_dot])


def is_terminal(state: CartPoleState) -> bool:
    return abs(state.x) > POSITION_LIMIT or abs(state.theta) > ANGLE_LIMIT


def cartpole_step(state: CartPoleState, action: int) -> tuple[CartPoleState, bool]:
    if action not in (0, 1):
        raise ValueError(f"action must be 0 or 1, got {action}")
    force = FORCE_MAG if action == 1 else -FORCE_MAG
    cos_t = math.cos(state.theta)
    sin_t = math.sin(state.theta)
    temp = (force + POLE_MASS_LENGTH * state.theta_dot ** 2 * sin_t) / TOTAL_MASS
    theta_acc = (GRAVITY * sin_t - cos_t * temp) / (
        HALF_LENGTH * (4.0 / 3.0 - POLE_MASS * cos_t ** 2 / TOTAL_MASS))
    x_acc = temp - POLE_MASS_LENGTH * theta_acc * cos_t / TOTAL_MASS
    nxt = CartPoleState(
        state.x + TAU * state.x_dot,
        state.x_dot + TAU * x_acc,
        state.theta + TAU * state.theta_dot,
        state.theta_dot + TAU * theta_acc,
    )
    return nxt, is_terminal(nxt)


def initial_state(rng: np.random.Generator) -> CartPoleState:
    return CartPoleState(*rng.uniform(-0.05, 0.05, size=4))


def policy_return(zeta, episode_seed: int) -> float:
    """Steps survived (1..200) by the policy ``a = [w . s + b > 0]``, ``(w, b) = 5 zeta``."""
    zeta = np.asarray(zeta, dtype=np.float64).reshape(-1)
    if zeta.size != POLICY_DIM:
        raise ValueError(f"policy design must have {POLICY_DIM} entries, got {zeta.size}")
    wb = POLICY_SCALE * zeta
    w, b = wb[:4], wb[4]
    state = initial_state(np.random.default_rng(episode_seed))
    steps = 0
    for _ in range(MAX_STEPS):
        action = 1 if float(w @ state.as_array()) + b > 0 else 0
        state, done = cartpole_step(state, action)
        steps += 1
        if done:
            break
    return float(steps)


class CartPoleObjective:
    """Mean return over ``episodes_per_query`` seeded episodes per call.

    Episode seeds are drawn from a stream seeded by ``seed``, so a fresh
    instance replays the same sequence of evaluations.
    """

    dim = POLICY_DIM

    def __init__(self, seed: int = 0, episodes_per_query: int = 5):
        if episodes_per_query < 1:
            raise ValueError("episodes_per_query must be >= 1")
        self.episodes_per_query = episodes_per_query
        self._seeds = np.random.default_rng(seed)

    def __call__(self, zeta) -> float:
        seeds = self._seeds.integers(0, 2 ** 63 - 1, size=self.episodes_per_query)
        return float(np.mean([policy_return(zeta, int(s)) for s in seeds]))
