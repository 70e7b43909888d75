"""Two-stage maximization of the calibration objective.

Stage 1 evaluates the objective on a ``k x k x k x k`` grid over
``(pan, roll, tilt, hfov)``. Stage 2 runs a bounded Nelder-Mead simplex search
from each of the ``l`` best grid nodes and keeps the best result.
"""

from __future__ import annotations

import time
import warnings
from dataclasses import dataclass, field
from typing import Optional

import numpy as np
from scipy.optimize import minimize

from .deviation import Measure, as_segment_array, segment_lengths
from .geometry import CameraParams
from .likelihood import ProcessLabel, _resolve, batch_objective, classify_segments

PARAM_NAMES = ("pan", "roll", "tilt", "hfov")
RESULT_FORMAT_VERSION = "1.0"


@dataclass(frozen=True)
class SearchConfig:
    """Search-space bounds (degrees) and optimizer budget.

    ``max_iter`` caps the simplex iterations of each refinement run; ``None``
    runs to tolerance. ``xatol`` is the simplex size tolerance in degrees.
    """

    k: int = 8
    l: int = 4
    pan: tuple = (-45.0, 45.0)
    roll: tuple = (-15.0, 15.0)
    tilt: tuple = (-35.0, 35.0)
    hfov: tuple = (50.0, 130.0)
    max_iter: Optional[int] = None
    xatol: float = 1e-4
    fatol: float = 1e-8

    def __post_init__(self):
        if self.k < 2:
            raise ValueError("grid resolution k must be at least 2")
        if not 1 <= self.l <= self.k ** 4:
            raise ValueError(f"l must lie in [1, k^4], got {self.l}")
        for name in PARAM_NAMES:
            lo, hi = getattr(self, name)
            if not lo < hi:
                raise ValueError(f"empty {name} bounds {lo, hi}")
        if not (0 < self.hfov[0] and self.hfov[1] < 180):
            raise ValueError("hfov bounds must lie inside (0, 180)")
        if self.max_iter is not None and self.max_iter < 1:
            raise ValueError("max_iter must be at least 1")

    @classmethod
    def fast(cls, **kwargs):
        kwargs.setdefault("max_iter", 10)
        return cls(**kwargs)

    @property
    def lower(self):
        return np.array([getattr(self, n)[0] for n in PARAM_NAMES], dtype=float)

    @property
    def upper(self):
        return np.array([getattr(self, n)[1] for n in PARAM_NAMES], dtype=float)

    def contains(self, x, tol=1e-9):
        x = np.asarray(x, dtype=float)
        return bool(np.all(x >= self.lower - tol) and np.all(x <= self.upper + tol))

    def axes(self):
        """Cell-center samples ``a + (j + 0.5)(b - a)/k`` for each dimension."""
        j = np.arange(self.k) + 0.5
        return [lo + j * (hi - lo) / self.k for lo, hi in zip(self.lower, self.upper)]


@dataclass(frozen=True)
class GridEvaluation:
    """All grid proposals, sorted by decreasing objective.

    ``index`` holds each row's linear position in the unsorted C-order grid.
    """

    proposals: np.ndarray
    values: np.ndarray
    index: np.ndarray

    def __len__(self):
        return len(self.values)

    def best(self, width, height):
        return CameraParams.from_vector(self.proposals[0], width, height)


def grid_proposals(search):
    mesh = np.meshgrid(*search.axes(), indexing="ij")
    return np.column_stack([m.ravel() for m in mesh])


def _chunked_objective(segs, X, width, height, config, weights, chunk=1024):
    out = np.empty(len(X))
    for s in range(0, len(X), chunk):
        x = X[s:s + chunk]
        out[s:s + chunk] = batch_objective(segs, x[:, 0], x[:, 1], x[:, 2], x[:, 3], width, height, config, weights)
    return out


def _weights(segs, config):
    return segment_lengths(segs) if config.length_weighted else np.ones(len(segs))


def grid_stage(segments, width, height, measure=None, config=None, search=None):
    """Evaluate the objective on every grid node; ties keep grid order."""
    config = _resolve(measure, config)
    search = search or SearchConfig()
    segs = as_segment_array(segments)
    if len(segs) == 0:
        raise ValueError("no segments")
    X = grid_proposals(search)
    values = _chunked_objective(segs, X, width, height, config, _weights(segs, config))
    order = np.argsort(-values, kind="stable")
    return GridEvaluation(X[order], values[order], order)


@dataclass
class RefinementTrace:
    seed: np.ndarray
    seed_value: float
    x: np.ndarray
    value: float
    iterations: int
    evaluations: int
    path: list = field(default_factory=list)


def _refine(segs, x0, width, height, config, search, weights):
    lo, hi = search.lower, search.upper
    x0 = np.clip(np.asarray(x0, dtype=float), lo, hi)

    def negative(x):
        x = np.clip(x, lo, hi)
        return -batch_objective(segs, x[:1], x[1:2], x[2:3], x[3:4], width, height, config, weights)[0]

    # Initial simplex edges of half a grid cell, stepping inwards at the bounds.
    step = (hi - lo) / (2.0 * search.k)
    simplex = [x0]
    for j in range(4):
        v = x0.copy()
        v[j] = v[j] + step[j] if v[j] + step[j] <= hi[j] else v[j] - step[j]
        simplex.append(v)
    path = []
    options = {
        "initial_simplex": np.array(simplex),
        "xatol": search.xatol,
        "fatol": search.fatol,
        "maxiter": search.max_iter if search.max_iter is not None else 100_000,
        "maxfev": 1_000_000,
    }
    seed_value = -negative(x0)
    with warnings.catch_warnings():
        warnings.simplefilter("ignore", RuntimeWarning)
        res = minimize(negative, x0, method="Nelder-Mead", bounds=list(zip(lo, hi)),
                       callback=lambda xk: path.append(np.array(xk)), options=options)
    x, value = np.clip(res.x, lo, hi), -float(res.fun)
    if value < seed_value:
        x, value = x0, seed_value
    return RefinementTrace(x0, seed_value, x, value, int(res.nit), int(res.nfev), path)


def refine(seed, segments, measure=None, config=None, search=None):
    """Bounded local ascent from ``seed``; never returns a worse point than the seed.

    Returns ``(params, objective)``.
    """
    config = _resolve(measure, config)
    search = search or SearchConfig()
    segs = as_segment_array(segments)
    intr = seed.intrinsics
    trace = _refine(segs, seed.as_vector(), intr.width, intr.height, config, search, _weights(segs, config))
    return CameraParams.from_vector(trace.x, intr.width, intr.height), trace.value


@dataclass
class CalibrationResult:
    params: CameraParams
    objective: float
    scores: list
    cues: object
    wall_time: float
    grid_best: np.ndarray
    grid_best_value: float
    traces: list
    degenerate: bool
    measure: Measure
    n_segments: int
    total_length: float
    predicted_errors: Optional[dict] = None

    @property
    def labels(self):
        return [s.label for s in self.scores]

    def label_counts(self):
        counts = {m: 0 for m in ProcessLabel}
        for s in self.scores:
            counts[s.label] += 1
        return counts

    def to_dict(self):
        p = self.params
        doc = {
            "format_version": RESULT_FORMAT_VERSION,
            "measure": self.measure.value,
            "params": {
                "pan": p.angles.pan,
                "roll": p.angles.roll,
                "tilt": p.angles.tilt,
                "hfov": p.hfov,
                "focal_px": p.focal_px,
                "width": p.intrinsics.width,
                "height": p.intrinsics.height,
            },
            "objective": self.objective,
            "cues": self.cues.to_dict() if self.cues is not None else None,
            "assignments": [s.label.name.lower() for s in self.scores],
            "label_counts": {m.name.lower(): c for m, c in self.label_counts().items()},
            "degenerate": self.degenerate,
            "wall_time": self.wall_time,
            "grid_best": dict(zip(PARAM_NAMES, map(float, self.grid_best))),
            "grid_best_objective": self.grid_best_value,
            "refinement": [
                {"seed": dict(zip(PARAM_NAMES, map(float, t.seed))), "objective": t.value,
                 "iterations": t.iterations, "evaluations": t.evaluations}
                for t in self.traces
            ],
        }
        if self.predicted_errors is not None:
            doc["predicted_errors"] = dict(self.predicted_errors)
        return doc


def calibrate(segments, width, height, measure=None, config=None, search=None, return_grid=False):
    """Estimate focal length and rotation from line segments.

    Args:
        segments: ``(n, 4)`` array or list of segments in pixel coordinates.
        width, height: image size in pixels.
        measure: deviation measure letter; defaults to ``config.measure`` or b.
        config: :class:`MixtureConfig`; Table 1 defaults when omitted.
        search: :class:`SearchConfig`; use ``SearchConfig.fast()`` for the
            iteration-capped variant.
        return_grid: also return the :class:`GridEvaluation`.
    """
    from .reliability import extract_cues

    t0 = time.perf_counter()
    config = _resolve(measure, config)
    search = search or SearchConfig()
    segs = as_segment_array(segments)
    if len(segs) == 0:
        raise ValueError("no segments")
    weights = _weights(segs, config)
    grid = grid_stage(segs, width, height, config=config, search=search)
    traces = [_refine(segs, grid.proposals[i], width, height, config, search, weights)
              for i in range(min(search.l, len(grid)))]
    # strict '>' keeps the earliest (best-ranked) seed on ties
    best = traces[0]
    for t in traces[1:]:
        if t.value > best.value:
            best = t
    params = CameraParams.from_vector(best.x, width, height)
    scores = classify_segments(segs, params, config=config)
    result = CalibrationResult(
        params=params,
        objective=best.value,
        scores=scores,
        cues=None,
        wall_time=0.0,
        grid_best=grid.proposals[0],
        grid_best_value=float(grid.values[0]),
        traces=traces,
        degenerate=False,
        measure=config.measure,
        n_segments=len(segs),
        total_length=float(segment_lengths(segs).sum()),
    )
    counts = result.label_counts()
    result.degenerate = any(counts[m] == 0 for m in ProcessLabel if m is not ProcessLabel.BACKGROUND)
    result.cues = extract_cues(result, grid)
    result.wall_time = time.perf_counter() - t0
    return (result, grid) if return_grid else result
