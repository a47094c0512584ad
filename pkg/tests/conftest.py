import numpy as np
import pytest


def central_diff(f, theta, h=1e-5):
    """Central finite-difference gradient of scalar ``f`` at flat ``theta``."""
    theta = np.asarray(theta, dtype=np.float64)
    g = np.empty_like(theta)
    for i in range(theta.size):
        tp = theta.copy()
        tm = theta.copy()
        tp[i] += h
        tm[i] -= h
        g[i] = (f(tp) - f(tm)) / (2 * h)
    return g


def rel_err(a, b, floor=1e-6):
    """Per-coordinate relative error, with an absolute floor for near-zero entries."""
    a = np.asarray(a)
    b = np.asarray(b)
    return np.abs(a - b) / np.maximum(np.maximum(np.abs(a), np.abs(b)), floor)


@pytest.fixture
def rng():
    return np.random.default_rng(20240601)
