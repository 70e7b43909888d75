"""Synthetic Manhattan scenes with exact ground truth.

Manhattan segments are 3-D segments parallel to one world axis, projected with
``x = K R X`` and clipped to the image. Background segments have a uniformly
random midpoint, orientation and length. Optional isotropic Gaussian noise is
added to the clipped endpoints.
"""

from __future__ import annotations

from dataclasses import dataclass, field

import numpy as np

from .geometry import CameraParams
from .likelihood import PROCESS_COLUMN, ProcessLabel

MIN_SEGMENT_PX = 10.0


class PlacementError(RuntimeError):
    """Not enough segments survived projection and clipping."""


@dataclass(frozen=True)
class SynthConfig:
    params: CameraParams
    counts: tuple = (30, 30, 30, 5)  # vertical, horizontal1, horizontal2, background
    noise: float = 0.0
    seed: int = 0
    depth_range: tuple = (2.0, 10.0)
    length_range: tuple = (0.5, 3.0)
    max_tries: int = 1000

    def __post_init__(self):
        if len(self.counts) != 4 or any(c < 0 for c in self.counts):
            raise ValueError(f"counts must be four non-negative integers, got {self.counts}")
        if self.noise < 0:
            raise ValueError("noise must be non-negative")


@dataclass
class SynthScene:
    segments: np.ndarray
    labels: list
    params: CameraParams
    config: SynthConfig = field(repr=False, default=None)

    @property
    def width(self):
        return self.params.intrinsics.width

    @property
    def height(self):
        return self.params.intrinsics.height


def clip_segment(p, q, width, height):
    """Liang-Barsky clip of segment ``p -> q`` to ``[0, width] x [0, height]``.

    Returns the clipped ``(p, q)`` or ``None`` if the segment misses the image.
    """
    d = q - p
    t0, t1 = 0.0, 1.0
    for pi, qi in ((-d[0], p[0]), (d[0], width - p[0]), (-d[1], p[1]), (d[1], height - p[1])):
        if pi == 0:
            if qi < 0:
                return None
            continue
        t = qi / pi
        if pi < 0:
            t0 = max(t0, t)
        else:
            t1 = min(t1, t)
        if t0 > t1:
            return None
    return p + t0 * d, p + t1 * d


def _manhattan_segment(rng, K, K_inv, direction, width, height, cfg):
    x = np.array([rng.uniform(0, width), rng.uniform(0, height), 1.0])
    depth = rng.uniform(*cfg.depth_range)
    a = depth * (K_inv @ x)
    b = a + rng.uniform(*cfg.length_range) * rng.choice((-1.0, 1.0)) * direction
    if b[2] < 0.1:
        # mirror through a, which lies at positive depth: the new endpoint is farther away
        b = 2.0 * a - b
    pa, pb = K @ a, K @ b
    return clip_segment(pa[:2] / pa[2], pb[:2] / pb[2], width, height)


def _background_segment(rng, width, height):
    mid = np.array([rng.uniform(0, width), rng.uniform(0, height)])
    theta = rng.uniform(0, np.pi)
    half = rng.uniform(MIN_SEGMENT_PX, 0.3 * np.hypot(width, height)) / 2.0
    d = half * np.array([np.cos(theta), np.sin(theta)])
    return clip_segment(mid - d, mid + d, width, height)


def generate(config: SynthConfig) -> SynthScene:
    """Sample a scene; deterministic for a given ``config.seed``."""
    rng = np.random.default_rng(config.seed)
    intr = config.params.intrinsics
    W, H = intr.width, intr.height
    K, K_inv = intr.K, intr.K_inv
    R = config.params.rotation
    rows, labels = [], []
    order = (ProcessLabel.VERTICAL, ProcessLabel.HORIZONTAL1, ProcessLabel.HORIZONTAL2, ProcessLabel.BACKGROUND)
    for label, count in zip(order, config.counts):
        for _ in range(count):
            for _ in range(config.max_tries):
                if label is ProcessLabel.BACKGROUND:
                    seg = _background_segment(rng, W, H)
                else:
                    seg = _manhattan_segment(rng, K, K_inv, R[:, PROCESS_COLUMN[label]], W, H, config)
                if seg is not None and np.hypot(*(seg[1] - seg[0])) >= MIN_SEGMENT_PX:
                    break
            else:
                raise PlacementError(f"cannot place a {label.name.lower()} segment "
                                     f"after {config.max_tries} attempts")
            rows.append(np.concatenate(seg))
            labels.append(label)
    segs = np.array(rows, dtype=float).reshape(-1, 4)
    if config.noise > 0:
        segs = segs + rng.normal(0.0, config.noise, segs.shape)
    return SynthScene(segs, labels, config.params, config)


def random_params(rng, width=640, height=480, pan=(-45, 45), roll=(-15, 15), tilt=(-35, 35), hfov=(50, 130)):
    """Camera parameters drawn uniformly from the given ranges."""
    return CameraParams.from_values(
        rng.uniform(*pan), rng.uniform(*roll), rng.uniform(*tilt), hfov=rng.uniform(*hfov),
        width=width, height=height,
    )
