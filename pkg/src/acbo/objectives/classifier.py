"""Bundled digit classifier and its weight-file format.

Weight file layout (all integers little-endian uint32, floats little-endian
float64)::

    bytes 0..3    magic b"ACBW"
    bytes 4..7    format version (1)
    bytes 8..11   number of layer widths L
    next 4*L      layer widths, input first
    next 4*(L-2)  hidden activation codes (0 tanh, 1 relu, 2 identity)
    remainder     parameters, flat, in the order used by ``nn_core``
"""
from __future__ import annotations

import struct
from dataclasses import dataclass
from importlib import resources
from pathlib import Path

import numpy as np
from scipy.special import softmax

from ..nn_core import ACTIVATIONS, AdamState, NetworkSpec, ParamVector, ShapeError, adam_step, backward, forward, init_params
from . import digits

MAGIC = b"ACBW"
VERSION = 1
N_CLASSES = 10
BUNDLED_WEIGHTS = "classifier.bin"
TRAIN_SEED = 1234
HELDOUT_SEED = 98765


@dataclass(frozen=True, eq=False)
class Classifier:
    params: ParamVector
    width: int = digits.SIDE
    height: int = digits.SIDE

    def __post_init__(self):
        if self.params.spec.n_in != self.width * self.height:
            raise ShapeError("classifier input width must equal W*H")
        if self.params.spec.n_out != N_CLASSES:
            raise ShapeError("classifier must have 10 outputs")


def classify(clf: Classifier, image) -> np.ndarray:
    """Class probabilities for one (W, H) image or a batch (n, W, H)."""
    img = np.asarray(image, dtype=np.float64)
    shape = (clf.width, clf.height)
    if img.shape[-2:] != shape or img.ndim not in (2, 3):
        raise ShapeError(f"expected image shape {shape}, got {img.shape}")
    flat = img.reshape(-1, clf.width * clf.height)
    p = softmax(forward(clf.params, flat), axis=-1)
    return p[0] if img.ndim == 2 else p


def save_weights(clf: Classifier, path) -> None:
    spec = clf.params.spec
    codes = [ACTIVATIONS.index(a) for a in spec.activation]
    with open(path, "wb") as fh:
        fh.write(MAGIC)
        fh.write(struct.pack("<II", VERSION, len(spec.layer_widths)))
        fh.write(struct.pack(f"<{len(spec.layer_widths)}I", *spec.layer_widths))
        fh.write(struct.pack(f"<{len(codes)}I", *codes))
        fh.write(clf.params.values.astype("<f8").tobytes())


def parse_weights(data: bytes) -> Classifier:
    if data[:4] != MAGIC:
        raise ValueError("not a classifier weight file (bad magic)")
    version, n = struct.unpack_from("<II", data, 4)
    if version != VERSION:
        raise ValueError(f"unsupported weight file version {version}")
    off = 12
    widths = struct.unpack_from(f"<{n}I", data, off)
    off += 4 * n
    codes = struct.unpack_from(f"<{n - 2}I", data, off)
    off += 4 * (n - 2)
    spec = NetworkSpec(widths, tuple(ACTIVATIONS[c] for c in codes))
    values = np.frombuffer(data, dtype="<f8", offset=off)
    if values.size != spec.n_params:
        raise ValueError(f"weight file holds {values.size} parameters, expected {spec.n_params}")
    return Classifier(ParamVector(values.astype(np.float64), spec))


def load_weights(path) -> Classifier:
    return parse_weights(Path(path).read_bytes())


def load_bundled() -> Classifier:
    data = resources.files("acbo.data").joinpath(BUNDLED_WEIGHTS).read_bytes()
    return parse_weights(data)


def accuracy(clf: Classifier, images, labels) -> float:
    return float(np.mean(classify(clf, images).argmax(axis=-1) == labels))


def train_classifier(seed: int = TRAIN_SEED, n_train: int = 10_000, hidden=(64,),
                     epochs: int = 10, batch: int = 64, lr: float = 2e-3,
                     label_smoothing: float = 0.1, log=None) -> Classifier:
    """Fit a softmax MLP on a freshly generated synthetic corpus.

    The defaults reproduce the bundled weights. Label smoothing keeps the
    confidences away from 0 and 1, so a query-only attacker sees a score
    surface with usable slope instead of a plateau.
    """
    images, labels = digits.make_corpus(n_train, seed)
    X = images.reshape(n_train, -1)
    onehot = np.eye(N_CLASSES)[labels] * (1.0 - label_smoothing) + label_smoothing / N_CLASSES
    rng = np.random.default_rng(seed + 1)
    spec = NetworkSpec((X.shape[1], *hidden, N_CLASSES), "relu")
    params = init_params(spec, rng)
    opt = AdamState.for_params(params)
    for epoch in range(epochs):
        order = rng.permutation(n_train)
        total = 0.0
        for start in range(0, n_train, batch):
            idx = order[start:start + batch]
            p = softmax(forward(params, X[idx]), axis=-1)
            total -= (onehot[idx] * np.log(p)).sum()
            grad, _ = backward(params, X[idx], (p - onehot[idx]) / len(idx))
            opt, params = adam_step(opt, params, grad, lr)
        if log is not None:
            log(f"epoch {epoch + 1}: mean cross-entropy {total / n_train:.4f}")
    return Classifier(params)
