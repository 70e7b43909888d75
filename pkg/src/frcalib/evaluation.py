"""Per-image error metrics and the summary tables built from them."""

from __future__ import annotations

import csv
import io
import math
from dataclasses import asdict, dataclass
from typing import Optional

import numpy as np

from .geometry import CameraParams, fold_pan, frame_angle_error
from .reliability import gate_indices

METRICS = ("roll", "tilt", "pan", "focal", "fov", "frame")
GATED_METRICS = ("roll", "tilt", "focal")
AGGREGATE_COLUMNS = ("metric", "unit", "n", "mean", "se", "se_flag")
UNITS = {"roll": "deg", "tilt": "deg", "pan": "deg", "focal": "%", "fov": "%", "frame": "deg"}


@dataclass(frozen=True)
class ErrorRecord:
    roll: float
    tilt: float
    pan: Optional[float]
    focal: float
    fov: float
    frame: Optional[float]

    def get(self, metric):
        return getattr(self, metric)


def pan_difference(estimate, truth):
    """Absolute pan difference after folding it modulo 90 degrees into [-45, 45)."""
    return float(abs(fold_pan(estimate - truth)))


def per_image_errors(estimate: CameraParams, truth: CameraParams, has_pan=True):
    """Absolute roll/tilt/pan errors (deg), focal and FOV errors (%) and frame error (deg).

    ``has_pan=False`` leaves the pan and frame errors as ``None`` for ground
    truth without a pan angle.
    """
    e, t = estimate.angles, truth.angles
    return ErrorRecord(
        roll=abs(e.roll - t.roll),
        tilt=abs(e.tilt - t.tilt),
        pan=pan_difference(e.pan, t.pan) if has_pan else None,
        focal=100.0 * abs(estimate.focal_px - truth.focal_px) / truth.focal_px,
        fov=100.0 * abs(estimate.hfov - truth.hfov) / truth.hfov,
        frame=frame_angle_error(estimate.rotation, truth.rotation) if has_pan else None,
    )


def _values(records, metric):
    return np.array([r.get(metric) for r in records if r.get(metric) is not None], dtype=float)


def mean_se(values):
    """Mean and standard error (``n - 1`` sample standard deviation over sqrt n).

    A single value has standard error 0 by convention; the third return value
    flags that case.
    """
    x = np.asarray(values, dtype=float)
    if x.size == 0:
        raise ValueError("no values")
    if x.size == 1:
        return float(x[0]), 0.0, True
    return float(x.mean()), float(x.std(ddof=1) / math.sqrt(x.size)), False


def aggregate(records, metrics=METRICS):
    """One row per metric with its mean and standard error."""
    if not records:
        raise ValueError("no records")
    rows = []
    for m in metrics:
        vals = _values(records, m)
        if vals.size == 0:
            continue
        mean, se, flag = mean_se(vals)
        rows.append({"metric": m, "unit": UNITS[m], "n": int(vals.size), "mean": mean, "se": se, "se_flag": flag})
    return rows


def gated_table(records, predictions, fractions=(25, 50, 75, 100), metrics=GATED_METRICS):
    """MAE over the most reliable fraction of images, per metric.

    ``predictions`` maps each metric to an array of predicted errors aligned
    with ``records``.
    """
    if not records:
        raise ValueError("no records")
    rows = []
    for f in fractions:
        row = {"fraction": f}
        for m in metrics:
            if m not in predictions or predictions[m] is None:
                raise ValueError(f"missing predictions for {m}")
            pred = np.asarray(predictions[m], dtype=float)
            if pred.shape != (len(records),):
                raise ValueError(f"{m}: expected {len(records)} predictions, got {pred.shape}")
            # original order, so the 100% row reproduces aggregate() bit for bit
            idx = np.sort(gate_indices(pred, f))
            row[m] = float(np.mean(np.array([records[i].get(m) for i in idx], dtype=float)))
            row["n"] = int(idx.size)
        rows.append(row)
    return rows


def histogram(values, lo, hi, width):
    """Fixed-width histogram with edges ``lo, lo + width, ..., hi``.

    Values outside ``[lo, hi]`` are dropped; ``hi`` falls in the last bin.
    Returns ``(edges, counts)``.
    """
    x = np.asarray(values, dtype=float).ravel()
    if x.size == 0:
        raise ValueError("no values")
    nbins = int(round((hi - lo) / width))
    if nbins < 1 or not math.isclose(lo + nbins * width, hi, rel_tol=1e-9, abs_tol=1e-12):
        raise ValueError("bin width must divide the range")
    edges = lo + width * np.arange(nbins + 1)
    counts, _ = np.histogram(x, bins=edges)
    return edges, counts


def histogram_rows(edges, counts):
    return [{"bin_lo": float(a), "bin_hi": float(b), "count": int(c)}
            for a, b, c in zip(edges[:-1], edges[1:], counts)]


def to_csv(rows, columns=None):
    """CSV text for a list of row dicts with a stable column order."""
    if not rows:
        return ""
    columns = list(columns or rows[0].keys())
    buf = io.StringIO()
    writer = csv.DictWriter(buf, fieldnames=columns, lineterminator="\n")
    writer.writeheader()
    for r in rows:
        writer.writerow({c: r.get(c) for c in columns})
    return buf.getvalue()


def format_table(rows, columns=None, precision=3):
    """Plain-text table for terminals and logs."""
    if not rows:
        return ""
    columns = list(columns or rows[0].keys())

    def fmt(v):
        if isinstance(v, float):
            return f"{v:.{precision}f}"
        return str(v)

    cells = [[fmt(r.get(c)) for c in columns] for r in rows]
    widths = [max(len(c), *(len(row[i]) for row in cells)) for i, c in enumerate(columns)]
    lines = ["  ".join(c.rjust(w) for c, w in zip(columns, widths))]
    lines.append("  ".join("-" * w for w in widths))
    lines += ["  ".join(v.rjust(w) for v, w in zip(row, widths)) for row in cells]
    return "\n".join(lines)


def records_to_rows(records):
    return [asdict(r) for r in records]
