"""
Planar views from an equirectangular panorama
=============================================

Render a synthetic panorama, sample camera views with the curation protocol
and check where a known landmark lands.
"""

import tempfile
from pathlib import Path

import numpy as np

from frcalib.curate import ProjectionSpec, curate, project, project_points, write_image

# A 2:1 panorama: longitude bands in red, latitude bands in green.
H, W = 512, 1024
v, u = np.mgrid[0:H, 0:W]
pano = np.zeros((H, W, 3), dtype=np.uint8)
pano[..., 0] = ((u // 32) % 2) * 200
pano[..., 1] = ((v // 32) % 2) * 200
pano[H // 2, W // 2] = (255, 255, 255)  # longitude 0, latitude 0

# With zero angles the landmark is the principal point.
spec = ProjectionSpec("demo", hfov=90.0, pan=0.0, roll=0.0, tilt=0.0)
view = project(pano, spec)
print("pixel at the image center:", view[240, 320])

# Tilting the camera up moves the landmark up the image by f * tan(tilt).
tilted = ProjectionSpec("demo", hfov=90.0, pan=0.0, roll=0.0, tilt=10.0)
xy, _ = project_points(0.0, 0.0, tilted)
print(f"with 10 deg tilt the landmark is at y = {xy[1]:.1f} "
      f"(expected {240 - 320 * np.tan(np.radians(10)):.1f})")

# Curate 15 views from each of two panoramas into a temporary directory.
with tempfile.TemporaryDirectory() as tmp:
    for name in ("hall", "office"):
        write_image(Path(tmp) / "panos" / f"{name}.png", np.roll(pano, len(name) * 50, axis=1))
    manifest = curate(Path(tmp) / "panos", Path(tmp) / "views", seed=3)
    print(f"{len(manifest['samples'])} views written")
    for s in manifest["samples"][:5]:
        print(f"  {s['image']}: hfov {s['hfov']:.0f}, pan {s['pan']:+7.2f}, "
              f"roll {s['roll']:+6.2f}, tilt {s['tilt']:+6.2f}")
