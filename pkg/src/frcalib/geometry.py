"""Pinhole camera model, Euler angle conventions and Manhattan frame utilities.

Coordinate conventions used throughout the package:

* Image: origin at the top-left pixel corner, x to the right, y down. The
  principal point is the image center ``(width / 2, height / 2)``.
* Camera: x right, y down, z along the optical axis.
* World (Manhattan) frame: X and Z are the two horizontal directions, Y is the
  vertical direction. With ``R = I`` the camera looks along world Z.

A rotation ``R`` maps world directions into the camera frame, ``x_cam = R X``,
so column ``i`` of ``R`` is the camera-frame direction of Manhattan axis ``i``
and its vanishing point is ``K @ R[:, i]``.

Euler angles (degrees) compose as::

    R = Rz(roll) @ Rx(tilt) @ Ry(pan)

i.e. pan about the world vertical axis first, then tilt about the camera x
axis, then roll about the optical axis. Elementary rotations are the usual
right-handed ones.
"""

from __future__ import annotations

import itertools
from dataclasses import dataclass

import numpy as np

AT_INFINITY_EPS = 1e-12

# Column index of each Manhattan axis in R.
HORIZONTAL1, VERTICAL, HORIZONTAL2 = 0, 1, 2


def fov_to_focal(hfov, width):
    """Focal length in pixels for a horizontal field of view in degrees."""
    hfov = np.asarray(hfov, dtype=float)
    if np.any((hfov <= 0) | (hfov >= 180)) or not np.all(np.isfinite(hfov)):
        raise ValueError(f"horizontal FOV must lie in (0, 180) degrees, got {hfov}")
    focal = width / (2.0 * np.tan(np.deg2rad(hfov) / 2.0))
    return float(focal) if focal.ndim == 0 else focal


def focal_to_fov(focal, width):
    """Horizontal field of view in degrees, ``2 * arctan(w / 2f)``."""
    focal = np.asarray(focal, dtype=float)
    if np.any(focal <= 0):
        raise ValueError(f"focal length must be positive, got {focal}")
    fov = np.rad2deg(2.0 * np.arctan(width / (2.0 * focal)))
    return float(fov) if fov.ndim == 0 else fov


@dataclass(frozen=True)
class Intrinsics:
    """Square-pixel, zero-skew camera with a central principal point."""

    focal_px: float
    width: int
    height: int

    def __post_init__(self):
        if not (np.isfinite(self.focal_px) and self.focal_px > 0):
            raise ValueError(f"focal_px must be positive, got {self.focal_px}")
        if self.width <= 0 or self.height <= 0:
            raise ValueError(f"image size must be positive, got {self.width}x{self.height}")

    @classmethod
    def from_fov(cls, hfov, width, height):
        return cls(fov_to_focal(hfov, width), width, height)

    @property
    def hfov(self):
        return focal_to_fov(self.focal_px, self.width)

    @property
    def principal_point(self):
        return np.array([self.width / 2.0, self.height / 2.0])

    @property
    def diagonal(self):
        return float(np.hypot(self.width, self.height))

    @property
    def K(self):
        cx, cy = self.principal_point
        f = self.focal_px
        return np.array([[f, 0.0, cx], [0.0, f, cy], [0.0, 0.0, 1.0]])

    @property
    def K_inv(self):
        cx, cy = self.principal_point
        f = self.focal_px
        return np.array([[1.0 / f, 0.0, -cx / f], [0.0, 1.0 / f, -cy / f], [0.0, 0.0, 1.0]])


@dataclass(frozen=True)
class EulerAngles:
    """Camera orientation in degrees. See the module docstring for the convention."""

    pan: float
    roll: float
    tilt: float

    def as_array(self):
        return np.array([self.pan, self.roll, self.tilt], dtype=float)


def _rx(a):
    c, s = np.cos(a), np.sin(a)
    return np.array([[1.0, 0.0, 0.0], [0.0, c, -s], [0.0, s, c]])


def _ry(a):
    c, s = np.cos(a), np.sin(a)
    return np.array([[c, 0.0, s], [0.0, 1.0, 0.0], [-s, 0.0, c]])


def _rz(a):
    c, s = np.cos(a), np.sin(a)
    return np.array([[c, -s, 0.0], [s, c, 0.0], [0.0, 0.0, 1.0]])


def euler_to_rotation(angles):
    """Rotation matrix ``Rz(roll) @ Rx(tilt) @ Ry(pan)`` for angles in degrees."""
    if not isinstance(angles, EulerAngles):
        angles = EulerAngles(*angles)
    pan, roll, tilt = np.deg2rad(angles.as_array())
    return _rz(roll) @ _rx(tilt) @ _ry(pan)


def euler_to_rotation_batch(pan, roll, tilt):
    """Vectorized :func:`euler_to_rotation`; angle arrays in degrees -> ``(n, 3, 3)``."""
    p, r, t = (np.deg2rad(np.asarray(a, dtype=float)).ravel() for a in (pan, roll, tilt))
    cp, sp = np.cos(p), np.sin(p)
    cr, sr = np.cos(r), np.sin(r)
    ct, st = np.cos(t), np.sin(t)
    # M = Rx(tilt) @ Ry(pan)
    m = np.empty((p.size, 3, 3))
    m[:, 0, 0], m[:, 0, 1], m[:, 0, 2] = cp, 0.0, sp
    m[:, 1, 0], m[:, 1, 1], m[:, 1, 2] = st * sp, ct, -st * cp
    m[:, 2, 0], m[:, 2, 1], m[:, 2, 2] = -ct * sp, st, ct * cp
    out = np.empty_like(m)
    out[:, 0] = cr[:, None] * m[:, 0] - sr[:, None] * m[:, 1]
    out[:, 1] = sr[:, None] * m[:, 0] + cr[:, None] * m[:, 1]
    out[:, 2] = m[:, 2]
    return out


def rotation_to_euler(R):
    """Inverse of :func:`euler_to_rotation`, valid for ``|tilt| < 90``.

    At gimbal lock the pan angle is set to zero and the remaining rotation is
    attributed to roll.
    """
    R = np.asarray(R, dtype=float)
    st = np.clip(R[2, 1], -1.0, 1.0)
    tilt = np.arcsin(st)
    if np.hypot(R[2, 0], R[2, 2]) < 1e-12:
        pan = 0.0
        roll = np.arctan2(R[1, 0], R[0, 0])
    else:
        pan = np.arctan2(-R[2, 0], R[2, 2])
        roll = np.arctan2(-R[0, 1], R[1, 1])
    return EulerAngles(*np.rad2deg([pan, roll, tilt]).tolist())


def is_rotation(R, atol=1e-9):
    R = np.asarray(R, dtype=float)
    return (
        R.shape == (3, 3)
        and np.allclose(R.T @ R, np.eye(3), rtol=0.0, atol=atol)
        and abs(np.linalg.det(R) - 1.0) <= atol
    )


@dataclass(frozen=True)
class CameraParams:
    """The unknowns of the calibration problem: focal length and rotation."""

    intrinsics: Intrinsics
    angles: EulerAngles

    @classmethod
    def from_values(cls, pan, roll, tilt, hfov=None, width=640, height=480, focal_px=None):
        if (hfov is None) == (focal_px is None):
            raise ValueError("give exactly one of hfov or focal_px")
        if focal_px is None:
            focal_px = fov_to_focal(hfov, width)
        return cls(Intrinsics(float(focal_px), width, height), EulerAngles(float(pan), float(roll), float(tilt)))

    @property
    def rotation(self):
        return euler_to_rotation(self.angles)

    @property
    def focal_px(self):
        return self.intrinsics.focal_px

    @property
    def hfov(self):
        return self.intrinsics.hfov

    def as_vector(self):
        """``(pan, roll, tilt, hfov)`` -- the search-space coordinates."""
        a = self.angles
        return np.array([a.pan, a.roll, a.tilt, self.hfov])

    @classmethod
    def from_vector(cls, x, width, height):
        pan, roll, tilt, hfov = (float(v) for v in x)
        return cls.from_values(pan, roll, tilt, hfov=hfov, width=width, height=height)


def vanishing_points(params):
    """Homogeneous Manhattan vanishing points as the rows of a ``(3, 3)`` array.

    Row order follows the world axes: horizontal X, vertical Y, horizontal Z.
    Points are not normalized; use :func:`at_infinity` to test the third
    coordinate.
    """
    return (params.intrinsics.K @ params.rotation).T


def vanishing_points_batch(K, R):
    """``(n, 3, 3)`` vanishing points, one row per axis, for a stack of rotations."""
    return np.einsum("ij,njk->nki", K, R)


def at_infinity(vp, eps=AT_INFINITY_EPS):
    """True where the normalized third homogeneous coordinate is below ``eps``."""
    vp = np.asarray(vp, dtype=float)
    norm = np.linalg.norm(vp, axis=-1)
    return np.abs(vp[..., 2]) <= eps * norm


def rotation_angle(R):
    """Magnitude in degrees of the rotation represented by ``R``."""
    c = (np.trace(R) - 1.0) / 2.0
    # arccos loses precision near 0 and 180 deg; use the axis-angle atan2 form.
    w = np.array([R[2, 1] - R[1, 2], R[0, 2] - R[2, 0], R[1, 0] - R[0, 1]])
    return float(np.rad2deg(np.arctan2(np.linalg.norm(w) / 2.0, c)))


def _signed_permutations():
    for perm in itertools.permutations(range(3)):
        for signs in itertools.product((1.0, -1.0), repeat=3):
            S = np.zeros((3, 3))
            S[list(perm), range(3)] = signs
            if np.linalg.det(S) > 0:
                yield S


_CUBE_GROUP = tuple(_signed_permutations())

SYMMETRY_GROUPS = {
    # Rotations about the vertical axis by multiples of 90 deg: horizontal
    # axes may be relabelled, the up direction is fixed by gravity.
    "gravity": tuple(S for S in _CUBE_GROUP if S[VERTICAL, VERTICAL] == 1.0),
    # Stabilizer of the vertical axis as an unsigned line (dihedral, 8 elements).
    "vertical_line": tuple(S for S in _CUBE_GROUP if abs(S[VERTICAL, VERTICAL]) == 1.0),
    "full": _CUBE_GROUP,
}


def frame_angle_error(estimated, truth, group="gravity"):
    """Smallest rotation (degrees) aligning two Manhattan frames.

    The error is ``min_S angle(estimated.T @ truth @ S)`` where ``S`` runs over
    relabellings of the world axes that leave the Manhattan frame unchanged.
    ``group`` selects which relabellings count as equivalent: ``"gravity"``
    (4 elements), ``"vertical_line"`` (8) or ``"full"`` (all 24 proper cube
    symmetries).
    """
    if isinstance(estimated, EulerAngles):
        estimated = euler_to_rotation(estimated)
    if isinstance(truth, EulerAngles):
        truth = euler_to_rotation(truth)
    D = np.asarray(estimated).T @ np.asarray(truth)
    return min(rotation_angle(D @ S) for S in SYMMETRY_GROUPS[group])


def fold_pan(pan):
    """Map a pan angle to its representative in ``[-45, 45)`` modulo 90 deg."""
    return (np.asarray(pan, dtype=float) + 45.0) % 90.0 - 45.0
