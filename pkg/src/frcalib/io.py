"""JSON/CSV formats shared by the library and the command line."""

from __future__ import annotations

import csv
import json
from pathlib import Path

import numpy as np

SEGMENTS_FORMAT_VERSION = "1.0"


class FormatError(ValueError):
    pass


def check_version(data, supported, what):
    """Reject documents whose major format version differs from ``supported``."""
    version = str(data.get("format_version", supported))
    if version.split(".")[0] != supported.split(".")[0]:
        raise FormatError(f"unsupported {what} format version {version} (expected {supported})")


def read_json(path):
    with open(path) as fh:
        return json.load(fh)


def write_json(path, data):
    path = Path(path)
    path.parent.mkdir(parents=True, exist_ok=True)
    with open(path, "w") as fh:
        json.dump(data, fh, indent=2)
        fh.write("\n")


def segments_to_json(segs, width=None, height=None, ground_truth=None):
    doc = {
        "format_version": SEGMENTS_FORMAT_VERSION,
        "segments": [dict(zip(("x1", "y1", "x2", "y2"), map(float, row))) for row in np.asarray(segs)],
    }
    if width is not None:
        doc["width"], doc["height"] = int(width), int(height)
    if ground_truth is not None:
        doc["ground_truth"] = ground_truth
    return doc


def segments_from_json(data):
    """Parse a segments document.

    Accepts either a bare JSON array of ``{x1, y1, x2, y2}`` objects or an
    object with a ``segments`` array. Returns ``(segs, doc)`` where ``doc`` is
    the full object (empty for a bare array).
    """
    if isinstance(data, list):
        data = {"segments": data}
    if not isinstance(data, dict) or not isinstance(data.get("segments"), list):
        raise FormatError("expected a JSON array of segments or an object with a 'segments' array")
    check_version(data, SEGMENTS_FORMAT_VERSION, "segments")
    try:
        segs = np.array([[float(s[k]) for k in ("x1", "y1", "x2", "y2")] for s in data["segments"]])
    except (KeyError, TypeError, ValueError) as exc:
        raise FormatError(f"malformed segment entry: {exc}") from exc
    return segs.reshape(-1, 4), data


def read_segments(path):
    """Load segments from a ``.json`` file or a detector-style CSV/text file."""
    path = Path(path)
    if path.suffix.lower() == ".json":
        return segments_from_json(read_json(path))
    return read_segments_csv(path), {}


def read_segments_csv(path):
    """Endpoint lists as written by common detectors: ``x1 y1 x2 y2 [extra...]`` per line.

    Commas or whitespace separate fields; a non-numeric first row is treated
    as a header.
    """
    rows = []
    with open(path, newline="") as fh:
        text = fh.read()
    dialect_rows = csv.reader(text.splitlines(), delimiter="," if "," in text else " ", skipinitialspace=True)
    for i, row in enumerate(dialect_rows):
        fields = [f for f in row if f.strip()]
        if not fields or fields[0].startswith("#"):
            continue
        try:
            rows.append([float(v) for v in fields[:4]])
        except ValueError:
            if i == 0:
                continue
            raise FormatError(f"{path}: line {i + 1} is not numeric")
        if len(rows[-1]) < 4:
            raise FormatError(f"{path}: line {i + 1} has fewer than 4 fields")
    return np.array(rows, dtype=float).reshape(-1, 4)
