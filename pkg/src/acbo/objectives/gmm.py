"""Two-component Gaussian-mixture toy objective and its discretized variant."""
from __future__ import annotations

import math
from dataclasses import dataclass

import numpy as np


@dataclass(frozen=True)
class GmmParams:
    w1: float = 0.51
    w2: float = 0.49
    mu1: float = -0.7
    mu2: float = 0.7
    sigma1: float = 0.6
    sigma2: float = 0.6

    def __post_init__(self):
        if self.sigma1 <= 0 or self.sigma2 <= 0:
            raise ValueError("GMM standard deviations must be positive")
        if self.w1 <= 0 or self.w2 <= 0:
            raise ValueError("GMM weights must be positive")


def _normal_pdf(x, mu, sigma):
    return np.exp(-0.5 * ((x - mu) / sigma) ** 2) / (math.sqrt(2.0 * math.pi) * sigma)


def gmm_score(params: GmmParams, x) -> float:
    """Mixture density at scalar ``x`` in the open interval (-1, 1)."""
    x = float(np.asarray(x, dtype=np.float64).reshape(-1)[0]) if np.ndim(x) else float(x)
    if not -1.0 < x < 1.0:
        raise ValueError(f"x must lie in (-1, 1), got {x}")
    return float(params.w1 * _normal_pdf(x, params.mu1, params.sigma1)
                 + params.w2 * _normal_pdf(x, params.mu2, params.sigma2))


class GmmObjective:
    """Continuous black-box scorer over (-1, 1)."""

    dim = 1

    def __init__(self, params: GmmParams = GmmParams()):
        self.params = params

    def __call__(self, x) -> float:
        if np.size(x) != 1:
            raise ValueError("GMM objective is one-dimensional")
        return gmm_score(self.params, x)

    def grid(self, n: int = 10_000) -> tuple[np.ndarray, np.ndarray]:
        """``n`` interior grid points and their scores."""
        xs = np.linspace(-1.0, 1.0, n + 2)[1:-1]
        return xs, np.array([gmm_score(self.params, x) for x in xs])


def grid_point(k: int, n: int) -> float:
    return -1.0 + 2.0 * (k + 0.5) / n


class Discretized:
    """Finite scorer over ``n`` cell midpoints of (-1, 1)."""

    def __init__(self, objective, n: int):
        if n < 2:
            raise ValueError("need at least 2 designs")
        self.objective = objective
        self.n_designs = n
        self.points = np.array([grid_point(k, n) for k in range(n)])

    def __call__(self, k) -> float:
        k = int(k)
        if not 0 <= k < self.n_designs:
            raise ValueError(f"design index {k} out of range")
        return float(self.objective(np.array([self.points[k]])))

    def values(self) -> np.ndarray:
        return np.array([self(k) for k in range(self.n_designs)])


def discretize(objective, n: int) -> Discretized:
    return Discretized(objective, n)
