"""Planar (gnomonic) views sampled from equirectangular panoramas.

Panorama convention: column ``u`` of a ``W``-wide panorama is longitude
``360 u / W - 180`` degrees and row ``v`` of an ``H``-high panorama is latitude
``90 - 180 v / H`` degrees, so longitude 0 / latitude 0 sits exactly on pixel
``(W / 2, H / 2)``. Latitude +90 is scene up (world ``-Y``); longitude 0 is the
world ``+Z`` axis, the view direction of a camera with zero angles.

Output pixel ``(x, y)`` has its center at those coordinates, so the principal
point ``(w / 2, h / 2)`` is a pixel center for even image sizes.
"""

from __future__ import annotations

import logging
from concurrent.futures import ProcessPoolExecutor
from dataclasses import asdict, dataclass
from pathlib import Path

import numpy as np

from .geometry import CameraParams, fov_to_focal
from .io import write_json

log = logging.getLogger(__name__)

DEFAULT_FOVS = (60.0, 75.0, 90.0, 105.0, 120.0)
PAN_RANGE = (-180.0, 180.0)
ROLL_RANGE = (-10.0, 10.0)
TILT_RANGE = (-30.0, 30.0)
MANIFEST_FORMAT_VERSION = "1.0"
IMAGE_SUFFIXES = (".png", ".jpg", ".jpeg", ".bmp", ".tif", ".tiff")


class PanoramaError(ValueError):
    """The panorama cannot be read or is not 2:1 equirectangular."""


@dataclass(frozen=True)
class ProjectionSpec:
    panorama: str
    hfov: float
    pan: float
    roll: float
    tilt: float
    width: int = 640
    height: int = 480
    seed: int = 0

    def __post_init__(self):
        if not 0 < self.hfov < 180:
            raise ValueError(f"hfov must lie in (0, 180), got {self.hfov}")
        if self.width <= 0 or self.height <= 0:
            raise ValueError("resolution must be positive")

    @property
    def focal_px(self):
        return fov_to_focal(self.hfov, self.width)

    @property
    def params(self):
        return CameraParams.from_values(self.pan, self.roll, self.tilt, hfov=self.hfov,
                                        width=self.width, height=self.height)

    def to_dict(self):
        d = asdict(self)
        d["focal_px"] = self.focal_px
        return d


def sample_specs(panoramas, per_scene=15, seed=0, fovs=DEFAULT_FOVS, uniform_fov=False,
                 fov_range=(60.0, 120.0), width=640, height=480):
    """Random views for each panorama id.

    With discrete FOVs every FOV in ``fovs`` is used ``per_scene / len(fovs)``
    times per panorama; with ``uniform_fov`` the FOV is drawn from
    ``fov_range``. Pan, roll and tilt are uniform over the dataset ranges.
    """
    if not uniform_fov and per_scene % len(fovs):
        raise ValueError(f"per_scene={per_scene} is not a multiple of {len(fovs)} FOVs")
    rng = np.random.default_rng(seed)
    specs = []
    for pano in panoramas:
        if uniform_fov:
            scene_fovs = rng.uniform(*fov_range, size=per_scene)
        else:
            scene_fovs = np.repeat(np.asarray(fovs, dtype=float), per_scene // len(fovs))
        for fov in scene_fovs:
            specs.append(ProjectionSpec(
                panorama=str(pano),
                hfov=float(fov),
                pan=float(rng.uniform(*PAN_RANGE)),
                roll=float(rng.uniform(*ROLL_RANGE)),
                tilt=float(rng.uniform(*TILT_RANGE)),
                width=width,
                height=height,
                seed=int(seed),
            ))
    return specs


def view_directions(spec):
    """World-frame unit ray for every output pixel, shape ``(h, w, 3)``."""
    params = spec.params
    K_inv = params.intrinsics.K_inv
    ys, xs = np.mgrid[0:spec.height, 0:spec.width].astype(float)
    pix = np.stack([xs, ys, np.ones_like(xs)], axis=-1)
    rays = pix @ (params.rotation.T @ K_inv).T
    return rays / np.linalg.norm(rays, axis=-1, keepdims=True)


def direction_to_lonlat(d):
    """Longitude and latitude in degrees of world directions ``(..., 3)``."""
    lon = np.degrees(np.arctan2(d[..., 0], d[..., 2]))
    lat = np.degrees(np.arctan2(-d[..., 1], np.hypot(d[..., 0], d[..., 2])))
    return lon, lat


def lonlat_to_pixel(lon, lat, pano_width, pano_height):
    u = (np.asarray(lon) + 180.0) / 360.0 * pano_width
    v = (90.0 - np.asarray(lat)) / 180.0 * pano_height
    return u, v


def check_panorama(pano, aspect_tol=0.01):
    pano = np.asarray(pano)
    if pano.ndim not in (2, 3) or pano.shape[0] < 2 or pano.shape[1] < 2:
        raise PanoramaError(f"not an image array: shape {pano.shape}")
    if abs(pano.shape[1] / pano.shape[0] - 2.0) > 2.0 * aspect_tol:
        raise PanoramaError(f"panorama must be 2:1, got {pano.shape[1]}x{pano.shape[0]}")
    return pano


def sample_panorama(pano, u, v, interpolation="bilinear"):
    """Sample at fractional pixel positions; longitude wraps, latitude clamps."""
    H, W = pano.shape[:2]
    img = pano.astype(float)
    if interpolation == "nearest":
        ui = np.rint(u).astype(int) % W
        vi = np.clip(np.rint(v).astype(int), 0, H - 1)
        return img[vi, ui]
    if interpolation != "bilinear":
        raise ValueError(f"unknown interpolation {interpolation!r}")
    v = np.clip(v, 0.0, H - 1.0)
    u0 = np.floor(u)
    v0 = np.floor(v)
    du, dv = u - u0, v - v0
    u0 = u0.astype(int) % W
    u1 = (u0 + 1) % W
    v0 = v0.astype(int)
    v1 = np.minimum(v0 + 1, H - 1)
    if img.ndim == 3:
        du, dv = du[..., None], dv[..., None]
    top = img[v0, u0] * (1 - du) + img[v0, u1] * du
    bottom = img[v1, u0] * (1 - du) + img[v1, u1] * du
    return top * (1 - dv) + bottom * dv


def project(pano, spec, interpolation="bilinear", aspect_tol=0.01):
    """Render the planar view ``spec`` of an equirectangular panorama."""
    pano = check_panorama(pano, aspect_tol)
    lon, lat = direction_to_lonlat(view_directions(spec))
    u, v = lonlat_to_pixel(lon, lat, pano.shape[1], pano.shape[0])
    out = sample_panorama(pano, u, v, interpolation)
    if np.issubdtype(pano.dtype, np.integer):
        info = np.iinfo(pano.dtype)
        out = np.clip(np.rint(out), info.min, info.max).astype(pano.dtype)
    return out


def project_points(lon, lat, spec):
    """Image coordinates of panorama directions in the view ``spec``.

    Returns ``(xy, in_front)``; points behind the camera get ``nan``.
    """
    lon, lat = np.radians(lon), np.radians(lat)
    d = np.stack([np.cos(lat) * np.sin(lon), -np.sin(lat), np.cos(lat) * np.cos(lon)], axis=-1)
    params = spec.params
    x = d @ (params.intrinsics.K @ params.rotation).T
    in_front = x[..., 2] > 1e-12
    with np.errstate(divide="ignore", invalid="ignore"):
        xy = np.where(in_front[..., None], x[..., :2] / x[..., 2:3], np.nan)
    return xy, in_front


def split_scenes(scene_ids, seed=0):
    """Seeded shuffle into equal train and test halves (test gets the odd one out)."""
    ids = sorted(scene_ids)
    order = np.random.default_rng(seed).permutation(len(ids))
    half = len(ids) // 2
    return {"train": sorted(ids[i] for i in order[:half]), "test": sorted(ids[i] for i in order[half:])}


def read_image(path):
    from PIL import Image

    try:
        with Image.open(path) as im:
            return np.asarray(im.convert("RGB"))
    except Exception as exc:  # PIL raises a zoo of exception types
        raise PanoramaError(f"cannot read {path}: {exc}") from exc


def write_image(path, img):
    from PIL import Image

    Path(path).parent.mkdir(parents=True, exist_ok=True)
    Image.fromarray(np.asarray(img, dtype=np.uint8)).save(path, format="PNG")


def find_panoramas(pano_dir):
    return sorted(p for p in Path(pano_dir).iterdir() if p.suffix.lower() in IMAGE_SUFFIXES)


def _render_scene(args):
    path, specs, out_dir, interpolation = args
    pano = check_panorama(read_image(path))
    rows = []
    for i, spec in enumerate(specs):
        name = f"{Path(path).stem}_{i:02d}.png"
        write_image(Path(out_dir) / "images" / name, project(pano, spec, interpolation))
        rows.append({"image": f"images/{name}", **spec.to_dict()})
    return rows


def curate(pano_dir, out_dir, seed=0, per_scene=15, fovs=DEFAULT_FOVS, uniform_fov=False,
           split=True, width=640, height=480, interpolation="bilinear", jobs=1):
    """Render views of every panorama in ``pano_dir`` and write a manifest.

    Unreadable or malformed panoramas are skipped with a warning. Writes
    ``manifest.json`` (and ``split.json`` when ``split``) to ``out_dir`` and
    returns the manifest document.
    """
    paths = find_panoramas(pano_dir)
    ids = [p.stem for p in paths]
    specs = sample_specs(ids, per_scene, seed, fovs, uniform_fov, width=width, height=height)
    tasks = [(p, specs[i * per_scene:(i + 1) * per_scene], out_dir, interpolation) for i, p in enumerate(paths)]
    samples, skipped = [], []
    if jobs > 1:
        with ProcessPoolExecutor(max_workers=jobs) as pool:
            futures = [pool.submit(_render_scene, t) for t in tasks]
            outcomes = []
            for f in futures:
                try:
                    outcomes.append(f.result())
                except PanoramaError as exc:
                    outcomes.append(exc)
    else:
        outcomes = []
        for t in tasks:
            try:
                outcomes.append(_render_scene(t))
            except PanoramaError as exc:
                outcomes.append(exc)
    for path, outcome in zip(paths, outcomes):
        if isinstance(outcome, Exception):
            log.warning("skipping %s: %s", path, outcome)
            skipped.append(path.stem)
        else:
            samples.extend(outcome)
    used = [i for i in ids if i not in skipped]
    manifest = {
        "format_version": MANIFEST_FORMAT_VERSION,
        "seed": seed,
        "per_scene": per_scene,
        "fovs": None if uniform_fov else [float(f) for f in fovs],
        "uniform_fov": bool(uniform_fov),
        "skipped": skipped,
        "samples": samples,
    }
    write_json(Path(out_dir) / "manifest.json", manifest)
    if split:
        write_json(Path(out_dir) / "split.json", {"format_version": MANIFEST_FORMAT_VERSION, "seed": seed,
                                                  **split_scenes(used, seed)})
    return manifest
