"""Procedurally rendered 16x16 digit images for the bundled classifier.

Each digit is a set of polylines in the unit square (x right, y down).  A
sample applies a random affine jitter (rotation, scale, shear, shift), a
random stroke width, and additive pixel noise; rendering is anti-aliased by
distance to the nearest stroke segment.
"""
from __future__ import annotations

import numpy as np

SIDE = 16


def _arc(cx, cy, rx, ry, start, stop, n=12):
    t = np.radians(np.linspace(start, stop, n))
    return list(zip(cx + rx * np.cos(t), cy + ry * np.sin(t)))


# angles measured clockwise from +x because y points down
STROKES: dict[int, list[list[tuple[float, float]]]] = {
    0: [_arc(0.5, 0.5, 0.27, 0.38, 0, 360, 24)],
    1: [[(0.35, 0.28), (0.55, 0.12), (0.55, 0.88)], [(0.38, 0.88), (0.72, 0.88)]],
    2: [_arc(0.5, 0.33, 0.25, 0.21, 190, 380, 12) + [(0.25, 0.88), (0.78, 0.88)]],
    3: [_arc(0.48, 0.31, 0.24, 0.19, 200, 450, 12), _arc(0.48, 0.69, 0.26, 0.2, 270, 520, 12)],
    4: [[(0.62, 0.88), (0.62, 0.12), (0.2, 0.64), (0.8, 0.64)]],
    5: [[(0.74, 0.12), (0.3, 0.12), (0.27, 0.46)] + _arc(0.5, 0.64, 0.26, 0.24, 220, 500, 14)],
    6: [[(0.68, 0.14)] + _arc(0.62, 0.6, 0.36, 0.46, 240, 180, 6) + _arc(0.5, 0.66, 0.24, 0.22, 180, 540, 18)],
    7: [[(0.22, 0.12), (0.78, 0.12), (0.42, 0.88)], [(0.35, 0.5), (0.68, 0.5)]],
    8: [_arc(0.5, 0.3, 0.2, 0.18, 0, 360, 18), _arc(0.5, 0.68, 0.25, 0.21, 0, 360, 20)],
    9: [_arc(0.5, 0.34, 0.24, 0.22, 0, 360, 18) + _arc(0.38, 0.4, 0.36, 0.46, 0, 60, 6) + [(0.32, 0.86)]],
}


def _segments(strokes):
    segs = []
    for line in strokes:
        pts = np.asarray(line, dtype=np.float64)
        segs.append(np.stack([pts[:-1], pts[1:]], axis=1))
    return np.concatenate(segs, axis=0)  # (n_seg, 2, 2)


_SEGMENTS = {d: _segments(s) for d, s in STROKES.items()}
_yy, _xx = np.mgrid[0:SIDE, 0:SIDE]
_PIXELS = np.stack([(_xx + 0.5) / SIDE, (_yy + 0.5) / SIDE], axis=-1).reshape(-1, 2)


def render(digit: int, transform: np.ndarray | None = None, width: float = 0.09) -> np.ndarray:
    """Render ``digit`` to a (16, 16) image in [0, 1]; ``transform`` is a 2x3 affine map."""
    segs = _SEGMENTS[digit]
    if transform is not None:
        A, t = transform[:, :2], transform[:, 2]
        segs = (segs - 0.5) @ A.T + 0.5 + t
    a, b = segs[:, 0], segs[:, 1]
    ab = b - a
    denom = np.maximum((ab * ab).sum(-1), 1e-12)
    ap = _PIXELS[:, None, :] - a[None]
    s = np.clip((ap * ab[None]).sum(-1) / denom, 0.0, 1.0)
    closest = a[None] + s[..., None] * ab[None]
    dist = np.sqrt(((_PIXELS[:, None, :] - closest) ** 2).sum(-1)).min(axis=1)
    img = np.clip(1.0 - (dist - width / 2) * SIDE / 1.2, 0.0, 1.0)
    return img.reshape(SIDE, SIDE)


def random_transform(rng: np.random.Generator) -> np.ndarray:
    angle = np.radians(rng.uniform(-12, 12))
    scale = rng.uniform(0.85, 1.1, size=2)
    shear = rng.uniform(-0.15, 0.15)
    c, s = np.cos(angle), np.sin(angle)
    A = np.array([[c, -s], [s, c]]) @ np.array([[1.0, shear], [0.0, 1.0]]) @ np.diag(scale)
    t = rng.uniform(-0.07, 0.07, size=2)
    return np.column_stack([A, t])


def make_corpus(n: int, seed: int, noise: float = 0.08) -> tuple[np.ndarray, np.ndarray]:
    """``n`` jittered digit images ``(n, 16, 16)`` with balanced labels ``(n,)``."""
    rng = np.random.default_rng(seed)
    labels = np.arange(n) % 10
    rng.shuffle(labels)
    images = np.empty((n, SIDE, SIDE))
    for k, d in enumerate(labels):
        img = render(int(d), random_transform(rng), width=rng.uniform(0.07, 0.13))
        img = img + noise * rng.standard_normal(img.shape)
        images[k] = np.clip(img, 0.0, 1.0)
    return images, labels


def prototype(digit: int) -> np.ndarray:
    """Clean, untransformed rendering of ``digit``."""
    return render(digit)
