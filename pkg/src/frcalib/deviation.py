"""Deviation measures between a line segment and a hypothesized vanishing point.

Five measures are implemented:

a  distance (px) from the vanishing point to the infinite line through the segment
b  angle (deg) between the segment and the vanishing line through its midpoint
c  distance (px) from an endpoint to that vanishing line
d  distance (px) from an endpoint to the vanishing line, measured orthogonally
   to the segment
e  angle (deg) between the interpretation-plane normal and the plane
   orthogonal to the vanishing direction (Gauss sphere)

The scalar functions raise on degenerate input. The ``batch_*`` kernels used by
the likelihood work on arrays and return ``inf`` instead, which the mixture
model turns into a zero Manhattan likelihood.
"""

from __future__ import annotations

import enum
from dataclasses import dataclass

import numpy as np

from .geometry import AT_INFINITY_EPS, Intrinsics


class Measure(str, enum.Enum):
    A = "a"
    B = "b"
    C = "c"
    D = "d"
    E = "e"

    @property
    def angular(self):
        return self in (Measure.B, Measure.E)

    @property
    def unit(self):
        return "deg" if self.angular else "px"


class DegenerateError(ValueError):
    """The vanishing point coincides with the anchor point, or the segment is degenerate."""


@dataclass(frozen=True)
class LineSegment:
    p1: tuple
    p2: tuple

    def __post_init__(self):
        p1 = tuple(float(v) for v in self.p1)
        p2 = tuple(float(v) for v in self.p2)
        if len(p1) != 2 or len(p2) != 2:
            raise ValueError("endpoints must be (x, y) pairs")
        if p1 == p2:
            raise DegenerateError(f"segment endpoints coincide at {p1}")
        object.__setattr__(self, "p1", p1)
        object.__setattr__(self, "p2", p2)

    @property
    def length(self):
        return float(np.hypot(self.p2[0] - self.p1[0], self.p2[1] - self.p1[1]))

    @property
    def midpoint(self):
        return ((self.p1[0] + self.p2[0]) / 2.0, (self.p1[1] + self.p2[1]) / 2.0)

    def as_array(self):
        return np.array([*self.p1, *self.p2])


def as_segment_array(segments):
    """Coerce segments to an ``(n, 4)`` float array of ``x1, y1, x2, y2`` rows."""
    if isinstance(segments, np.ndarray):
        arr = np.asarray(segments, dtype=float).reshape(-1, 4)
    else:
        rows = [s.as_array() if isinstance(s, LineSegment) else np.ravel(s) for s in segments]
        arr = np.asarray(rows, dtype=float).reshape(-1, 4)
    if not np.all(np.isfinite(arr)):
        raise ValueError("segment coordinates must be finite")
    if np.any((arr[:, 0] == arr[:, 2]) & (arr[:, 1] == arr[:, 3])):
        raise DegenerateError("zero-length segment")
    return arr


def segment_lengths(segs):
    return np.hypot(segs[:, 2] - segs[:, 0], segs[:, 3] - segs[:, 1])


def _normalize(vps):
    vps = np.asarray(vps, dtype=float)
    return vps / np.linalg.norm(vps, axis=-1, keepdims=True)


def _angle_terms(segs, vps):
    """Cross and dot products of segment and vanishing-line directions.

    Returns ``(cross, dot, seg_len, vl_norm, degenerate)`` broadcast to
    ``vps.shape[:-1] + (n,)``.
    """
    v = _normalize(vps)[..., None, :]
    mx = (segs[:, 0] + segs[:, 2]) / 2.0
    my = (segs[:, 1] + segs[:, 3]) / 2.0
    dx = segs[:, 2] - segs[:, 0]
    dy = segs[:, 3] - segs[:, 1]
    # Direction from the midpoint towards the vp; valid for points at infinity.
    lx = v[..., 0] - v[..., 2] * mx
    ly = v[..., 1] - v[..., 2] * my
    vl_norm = np.hypot(lx, ly)
    scale = np.abs(v[..., 0]) + np.abs(v[..., 1]) + np.abs(v[..., 2]) * (np.abs(mx) + np.abs(my))
    degenerate = vl_norm <= 1e-12 * scale
    cross = np.abs(dx * ly - dy * lx)
    dot = np.abs(dx * lx + dy * ly)
    return cross, dot, np.hypot(dx, dy), vl_norm, degenerate


def batch_a(segs, vps):
    v = _normalize(vps)[..., None, :]
    p1 = np.column_stack([segs[:, 0], segs[:, 1], np.ones(len(segs))])
    p2 = np.column_stack([segs[:, 2], segs[:, 3], np.ones(len(segs))])
    line = np.cross(p1, p2)
    num = np.abs(np.sum(line * v, axis=-1))
    w = np.abs(v[..., 2])
    finite = w > AT_INFINITY_EPS
    with np.errstate(divide="ignore", invalid="ignore"):
        out = num / (np.where(finite, w, 1.0) * np.hypot(line[:, 0], line[:, 1]))
    return np.where(finite, out, np.inf)


def batch_b(segs, vps):
    cross, dot, _, _, degenerate = _angle_terms(segs, vps)
    out = np.rad2deg(np.arctan2(cross, dot))
    return np.where(degenerate, np.inf, out)


def batch_c(segs, vps):
    cross, _, seg_len, vl_norm, degenerate = _angle_terms(segs, vps)
    with np.errstate(divide="ignore", invalid="ignore"):
        # half-length * sin(angle)
        out = 0.5 * cross / vl_norm
    return np.where(degenerate, np.inf, out)


def batch_d(segs, vps):
    cross, dot, seg_len, _, degenerate = _angle_terms(segs, vps)
    with np.errstate(divide="ignore", invalid="ignore"):
        # half-length * tan(angle)
        out = 0.5 * seg_len * cross / dot
    return np.where(degenerate | (dot <= 1e-15 * cross), np.inf, out)


def interpretation_normals(segs, focal, principal_point):
    """Unit normals of the planes through the camera center and each segment.

    ``focal`` may be a scalar or an array; the result has shape
    ``np.shape(focal) + (n, 3)``.
    """
    cx, cy = principal_point
    u1, v1 = segs[:, 0] - cx, segs[:, 1] - cy
    u2, v2 = segs[:, 2] - cx, segs[:, 3] - cy
    f = np.asarray(focal, dtype=float)[..., None]
    # (u1, v1, f) x (u2, v2, f), i.e. f^2 times the cross product of the
    # back-projected rays K^-1 (x, y, 1).
    n = np.stack(np.broadcast_arrays(f * (v1 - v2), f * (u2 - u1), u1 * v2 - v1 * u2), axis=-1)
    return n / np.linalg.norm(n, axis=-1, keepdims=True)


def batch_e(segs, directions, focal, principal_point):
    """Measure e for unit vanishing ``directions`` of shape ``(..., 3)``.

    ``focal`` must broadcast against ``directions.shape[:-2]`` (one focal
    length per stack of directions).
    """
    d = _normalize(directions)
    normals = interpretation_normals(segs, focal, principal_point)
    s = np.abs(np.einsum("...kc,...nc->...kn", d, normals))
    return np.rad2deg(np.arcsin(np.clip(s, 0.0, 1.0)))


_BATCH = {Measure.A: batch_a, Measure.B: batch_b, Measure.C: batch_c, Measure.D: batch_d}


def deviations(measure, segs, K, R):
    """Deviations of every segment from every Manhattan vanishing point.

    Args:
        measure: a :class:`Measure` or its letter.
        segs: ``(n, 4)`` segment array.
        K: ``(3, 3)`` or ``(P, 3, 3)`` intrinsic matrices.
        R: ``(P, 3, 3)`` rotations.

    Returns:
        ``(P, 3, n)`` array; axis 1 follows the columns of ``R``.
    """
    measure = Measure(measure)
    R = np.asarray(R, dtype=float)
    K = np.asarray(K, dtype=float)
    if measure is Measure.E:
        directions = np.swapaxes(R, -1, -2)
        focal = K[..., 0, 0]
        pp = (K[..., 0, 2].flat[0], K[..., 1, 2].flat[0])
        return batch_e(segs, directions, focal, pp)
    vps = np.swapaxes(K @ R, -1, -2)
    return _BATCH[measure](segs, vps)


# -- scalar API ---------------------------------------------------------------


def _one(segment):
    if not isinstance(segment, LineSegment):
        segment = LineSegment(*np.reshape(segment, (2, 2)))
    return segment.as_array()[None, :]


def vanishing_line(segment, vp):
    """Homogeneous line joining the segment midpoint and ``vp``."""
    segs = _one(segment)
    _, _, _, _, degenerate = _angle_terms(segs, np.asarray(vp, dtype=float))
    if degenerate.item():
        raise DegenerateError("vanishing point coincides with the segment midpoint")
    mx, my = (segs[0, 0] + segs[0, 2]) / 2.0, (segs[0, 1] + segs[0, 3]) / 2.0
    return np.cross([mx, my, 1.0], np.asarray(vp, dtype=float))


def deviation_a(segment, vp):
    """Distance from a finite vp to the segment's supporting line; ``inf`` at infinity."""
    return float(batch_a(_one(segment), vp)[0])


def _checked(kernel, segment, vp):
    segs = _one(segment)
    if _angle_terms(segs, np.asarray(vp, dtype=float))[4].item():
        raise DegenerateError("vanishing point coincides with the segment midpoint")
    return float(kernel(segs, vp)[0])


def deviation_b(segment, vp):
    return _checked(batch_b, segment, vp)


def deviation_c(segment, vp):
    return _checked(batch_c, segment, vp)


def deviation_d(segment, vp):
    """Endpoint offset along the segment normal; ``inf`` if that ray misses the vanishing line."""
    return _checked(batch_d, segment, vp)


def deviation_e(segment, vp_direction, intrinsics: Intrinsics):
    segs = _one(segment)
    d = np.asarray(vp_direction, dtype=float)
    if np.linalg.norm(d) == 0:
        raise DegenerateError("zero vanishing direction")
    return float(batch_e(segs, d[None, :], intrinsics.focal_px, intrinsics.principal_point)[0, 0])


def deviation(measure, segment, vp, intrinsics=None):
    """Dispatch to one of the scalar measures.

    For measure e, ``vp`` is a homogeneous image point and is lifted to a
    direction with ``intrinsics``.
    """
    measure = Measure(measure)
    if measure is Measure.E:
        if intrinsics is None:
            raise ValueError("measure e needs intrinsics")
        return deviation_e(segment, intrinsics.K_inv @ np.asarray(vp, dtype=float), intrinsics)
    return {Measure.A: deviation_a, Measure.B: deviation_b,
            Measure.C: deviation_c, Measure.D: deviation_d}[measure](segment, vp)
