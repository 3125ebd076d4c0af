"""Synthetic boundary-segmentation images.

Each image holds thin bright strokes (line segments and short circle arcs, the
boundary class) among bright blobs of similar intensity (distractors), blurred
and noised. Stroke directions are drawn from a small orientation pool, so a
model that is not rotation invariant only ever sees a few orientations.
"""

from __future__ import annotations

from dataclasses import dataclass

import numpy as np
from scipy.ndimage import gaussian_filter

from orbitconv.segnet import D4


@dataclass(frozen=True)
class SynthConfig:
    seed: int = 7
    count: int = 200
    size: int = 64
    strokes: tuple[int, int] = (3, 6)  # inclusive range per image
    arc_fraction: float = 0.3
    blobs: tuple[int, int] = (4, 8)
    blob_radius: tuple[float, float] = (1.5, 2.5)
    noise: float = 0.15  # uniform additive noise in [-noise, noise]
    blur: float = 0.7
    orientations: tuple[float, ...] = (-15.0, 0.0, 15.0)  # degrees

    def __post_init__(self):
        if self.size < 16:
            raise ValueError(f"image size must be >= 16, got {self.size}")
        if self.count < 1:
            raise ValueError("count must be positive")


def _draw_points(label, rows, cols):
    h, w = label.shape
    r = np.rint(rows).astype(int)
    c = np.rint(cols).astype(int)
    ok = (r >= 0) & (r < h) & (c >= 0) & (c < w)
    label[r[ok], c[ok]] = 1


def _line(label, rng, angle_deg):
    h, w = label.shape
    length = rng.uniform(0.35, 0.8) * w
    r0, c0 = rng.uniform(0.15 * h, 0.85 * h), rng.uniform(0.15 * w, 0.85 * w)
    a = np.deg2rad(angle_deg)
    t = np.linspace(-length / 2, length / 2, int(4 * length) + 2)
    # angle measured CCW from the +column axis; rows grow downward
    _draw_points(label, r0 - t * np.sin(a), c0 + t * np.cos(a))


def _arc(label, rng, angle_deg):
    """Arc whose tangent at its midpoint has the given direction."""
    h, w = label.shape
    radius = rng.uniform(0.3, 0.6) * w
    span = np.deg2rad(rng.uniform(25.0, 45.0))
    a = np.deg2rad(angle_deg)
    r0, c0 = rng.uniform(0.2 * h, 0.8 * h), rng.uniform(0.2 * w, 0.8 * w)
    side = 1.0 if rng.random() < 0.5 else -1.0
    # center sits along the normal of the tangent direction
    nr, nc = -np.cos(a) * side, -np.sin(a) * side
    cr, cc = r0 - radius * nr, c0 - radius * nc
    phi0 = np.arctan2(r0 - cr, c0 - cc)
    phi = np.linspace(phi0 - span / 2, phi0 + span / 2, int(4 * radius * span) + 2)
    _draw_points(label, cr + radius * np.sin(phi), cc + radius * np.cos(phi))


def _blob(canvas, rng, radius_range):
    h, w = canvas.shape
    rad = rng.uniform(*radius_range)
    r0, c0 = rng.uniform(0, h), rng.uniform(0, w)
    rr, cc = np.mgrid[0:h, 0:w]
    canvas[(rr - r0) ** 2 + (cc - c0) ** 2 <= rad**2] = 1.0


def generate_one(cfg: SynthConfig, index: int) -> tuple[np.ndarray, np.ndarray]:
    rng = np.random.default_rng([cfg.seed, index])
    size = cfg.size
    label = np.zeros((size, size), dtype=np.uint8)
    for _ in range(rng.integers(cfg.strokes[0], cfg.strokes[1] + 1)):
        angle = cfg.orientations[rng.integers(len(cfg.orientations))]
        if rng.random() < cfg.arc_fraction:
            _arc(label, rng, angle)
        else:
            _line(label, rng, angle)
    blobs = np.zeros((size, size))
    for _ in range(rng.integers(cfg.blobs[0], cfg.blobs[1] + 1)):
        _blob(blobs, rng, cfg.blob_radius)
    clean = np.maximum(label.astype(np.float64), blobs)
    if cfg.blur > 0:
        clean = gaussian_filter(clean, cfg.blur, mode="constant")
        clean /= max(clean.max(), 1e-12)
    noise = rng.uniform(-cfg.noise, cfg.noise, size=clean.shape) if cfg.noise > 0 else 0.0
    image = np.clip(clean + noise, 0.0, 1.0)
    return image[None], label


def generate(cfg: SynthConfig) -> tuple[np.ndarray, np.ndarray]:
    """Returns ``images`` (N x 1 x H x W, float64 in [0, 1]) and ``labels``
    (N x H x W, 0/1 uint8). Image ``i`` depends only on ``(seed, i)``."""
    pairs = [generate_one(cfg, i) for i in range(cfg.count)]
    images = np.stack([p[0] for p in pairs])
    labels = np.stack([p[1] for p in pairs])
    frac = labels.mean()
    assert frac < 0.3, f"boundary fraction {frac:.3f} is not a minority class"
    return images, labels


def orientation_holdout_split(images, labels, train_fraction: float = 0.8):
    """First 80% (by index) for training; each remaining image is expanded to its
    8 D4 variants, labels transformed alongside, in ``segnet.D4`` order.

    Returns ``(train_images, train_labels, test_images, test_labels)``.
    """
    n = len(images)
    if n < 10:
        raise ValueError(f"need at least 10 images to split, got {n}")
    n_train = int(round(train_fraction * n))
    test_x, test_y = [], []
    for x, y in zip(images[n_train:], labels[n_train:]):
        for g in D4:
            test_x.append(g.apply(x))
            test_y.append(g.apply(y))
    return images[:n_train], labels[:n_train], np.stack(test_x), np.stack(test_y)
