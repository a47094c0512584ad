"""Query-only attack objectives against the bundled classifier."""
from __future__ import annotations

from dataclasses import dataclass
from typing import Optional

import numpy as np

from ..nn_core import ShapeError
from .classifier import Classifier, classify


@dataclass(frozen=True, eq=False)
class AttackSpec:
    target_class: int = 1
    base_image: Optional[np.ndarray] = None
    base_class: Optional[int] = None
    delta: float = 0.2

    def __post_init__(self):
        if not 0 <= self.target_class < 10:
            raise ValueError("target_class must be in 0..9")
        if not 0 < self.delta <= 1:
            raise ValueError("delta must lie in (0, 1]")
        if self.base_image is not None:
            img = np.asarray(self.base_image, dtype=np.float64)
            if img.min() < 0 or img.max() > 1:
                raise ValueError("base image pixels must lie in [0, 1]")
            object.__setattr__(self, "base_image", img)
        if self.base_class is not None and self.base_class == self.target_class:
            raise ValueError("base_class must differ from target_class")


def design_to_image(clf: Classifier, x) -> np.ndarray:
    """Map a design in (-1, 1)^(W*H) to a (W, H) image in (0, 1)."""
    x = np.asarray(x, dtype=np.float64)
    n = clf.width * clf.height
    if x.shape[-1] != n:
        raise ShapeError(f"design must have {n} entries, got {x.shape[-1]}")
    return ((x + 1.0) / 2.0).reshape(*x.shape[:-1], clf.width, clf.height)


def perturbed_image(clf: Classifier, spec: AttackSpec, x) -> np.ndarray:
    if spec.base_image is None:
        raise ValueError("perturbation attack needs a base image")
    return np.clip(design_to_image(clf, x) * spec.delta + spec.base_image, 0.0, 1.0)


def attack_score(clf: Classifier, spec: AttackSpec, x):
    """Confidence of ``spec.target_class`` on the image encoded by ``x``."""
    p = classify(clf, design_to_image(clf, x))
    return p[..., spec.target_class]


def perturb_score(clf: Classifier, spec: AttackSpec, x):
    """Target confidence after adding the noise encoded by ``x`` to the base image."""
    p = classify(clf, perturbed_image(clf, spec, x))
    return p[..., spec.target_class]


class AttackObjective:
    """Black-box scorer wrapping ``attack_score`` or ``perturb_score``."""

    def __init__(self, clf: Classifier, spec: AttackSpec, perturb: bool = False):
        if perturb and spec.base_image is None:
            raise ValueError("perturbation attack needs a base image")
        self.clf = clf
        self.spec = spec
        self.perturb = perturb
        self.dim = clf.width * clf.height

    def __call__(self, x) -> float:
        x = np.asarray(x, dtype=np.float64)
        if x.shape != (self.dim,):
            raise ShapeError(f"design must have shape ({self.dim},), got {x.shape}")
        f = perturb_score if self.perturb else attack_score
        return float(f(self.clf, self.spec, x))

    def image(self, x) -> np.ndarray:
        if self.perturb:
            return perturbed_image(self.clf, self.spec, x)
        return design_to_image(self.clf, x)

    def batch_scores(self, X) -> np.ndarray:
        """Scores for a (n, dim) batch, for evaluation outside the query budget."""
        f = perturb_score if self.perturb else attack_score
        return np.asarray(f(self.clf, self.spec, np.asarray(X, dtype=np.float64)))
