"""Benchmark black-box objectives."""
from .attack import AttackObjective, AttackSpec, attack_score, perturb_score
from .cartpole import CartPoleObjective, CartPoleState, cartpole_step, policy_return
from .classifier import Classifier, classify, load_bundled
from .gmm import Discretized, GmmObjective, GmmParams, discretize, gmm_score

__all__ = [
    "AttackObjective", "AttackSpec", "attack_score", "perturb_score",
    "CartPoleObjective", "CartPoleState", "cartpole_step", "policy_return",
    "Classifier", "classify", "load_bundled",
    "Discretized", "GmmObjective", "GmmParams", "discretize", "gmm_score",
]
