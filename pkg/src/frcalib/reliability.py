"""Predicting the error of a calibration from global reliability cues.

Three cues are extracted from each calibration:

* ``min_segments`` -- the smallest number of segments assigned to any of the
  three Manhattan processes;
* ``grid_entropy`` -- entropy (nats) of the grid-stage likelihoods normalized
  into a distribution;
* ``mean_loglik`` -- final objective divided by the number of segments.

A :class:`ReliabilityModel` whitens the cue vectors and regresses absolute
roll, tilt and focal errors with K-nearest-neighbour averaging, choosing K per
target by 5-fold cross-validation.
"""

from __future__ import annotations

import math
from dataclasses import dataclass

import numpy as np
from sklearn.model_selection import KFold

from .likelihood import ProcessLabel

MODEL_FORMAT_VERSION = "1.0"
CUE_NAMES = ("min_segments", "grid_entropy", "mean_loglik")
TARGET_NAMES = ("roll", "tilt", "focal")
DEFAULT_K_GRID = tuple(range(1, 32, 2))


@dataclass(frozen=True)
class ReliabilityCues:
    min_segments: int
    grid_entropy: float
    mean_loglik: float

    def as_array(self):
        return np.array([self.min_segments, self.grid_entropy, self.mean_loglik], dtype=float)

    def to_dict(self):
        return {"min_segments": int(self.min_segments), "grid_entropy": float(self.grid_entropy),
                "mean_loglik": float(self.mean_loglik)}

    @classmethod
    def from_dict(cls, d):
        return cls(int(d["min_segments"]), float(d["grid_entropy"]), float(d["mean_loglik"]))


def softmax_entropy(values):
    """Entropy in nats of ``softmax(values)``; invariant to a constant shift."""
    v = np.asarray(values, dtype=float).ravel()
    z = v - v.max()
    p = np.exp(z)
    s = p.sum()
    logp = z - math.log(s)
    p = p / s
    h = -float(np.sum(p[p > 0] * logp[p > 0]))
    return min(max(0.0, h), math.log(v.size))


def extract_cues(result, grid, normalize="count"):
    """Reliability cues of a :class:`~frcalib.search.CalibrationResult`.

    ``normalize="length"`` divides the final objective by the total segment
    length instead of the segment count.
    """
    counts = result.label_counts()
    min_segments = min(counts[m] for m in ProcessLabel if m is not ProcessLabel.BACKGROUND)
    if normalize == "count":
        mean_loglik = result.objective / result.n_segments
    elif normalize == "length":
        mean_loglik = result.objective / result.total_length
    else:
        raise ValueError(f"unknown normalization {normalize!r}")
    return ReliabilityCues(int(min_segments), softmax_entropy(grid.values), float(mean_loglik))


def whitening(X, eps=1e-12):
    """Mean and symmetric (ZCA) whitening matrix of the rows of ``X``.

    Uses the population covariance. Directions with variance below ``eps``
    times the largest variance are zeroed rather than inverted.
    """
    X = np.asarray(X, dtype=float)
    mean = X.mean(axis=0)
    cov = np.atleast_2d(np.cov(X, rowvar=False, ddof=0))
    evals, evecs = np.linalg.eigh(cov)
    floor = eps * max(evals.max(), 0.0)
    inv_sqrt = np.where(evals > floor, 1.0 / np.sqrt(np.where(evals > floor, evals, 1.0)), 0.0)
    W = (evecs * inv_sqrt) @ evecs.T
    return mean, W


def knn_predict(train_X, train_y, query_X, k):
    """Average target of the ``k`` nearest training rows (Euclidean).

    Equal distances are resolved in favour of the lower training index.
    """
    train_X = np.atleast_2d(train_X)
    query_X = np.atleast_2d(query_X)
    d2 = ((query_X[:, None, :] - train_X[None, :, :]) ** 2).sum(axis=-1)
    nearest = np.argsort(d2, axis=1, kind="stable")[:, :k]
    return np.asarray(train_y)[nearest].mean(axis=1)


def select_k(Z, y, k_grid=DEFAULT_K_GRID, folds=5, seed=0):
    """K minimizing cross-validated mean absolute error; ties go to the smaller K."""
    n = len(y)
    splitter = KFold(n_splits=min(folds, n), shuffle=True, random_state=seed)
    candidates = [k for k in k_grid if k <= n - math.ceil(n / min(folds, n))] or [1]
    errors = np.zeros(len(candidates))
    for train, test in splitter.split(Z):
        for j, k in enumerate(candidates):
            pred = knn_predict(Z[train], y[train], Z[test], min(k, len(train)))
            errors[j] += np.abs(pred - y[test]).sum()
    return candidates[int(np.argmin(errors))], errors / n


@dataclass(frozen=True)
class ReliabilityModel:
    train_cues: np.ndarray
    train_targets: np.ndarray
    mean: np.ndarray
    W: np.ndarray
    ks: tuple
    seed: int = 0

    def whiten(self, cues):
        return (np.atleast_2d(np.asarray(cues, dtype=float)) - self.mean) @ self.W.T

    def unwhiten(self, Z):
        return np.atleast_2d(Z) @ np.linalg.inv(self.W.T) + self.mean

    def predict(self, cues):
        """Predicted absolute errors for one cue vector (dict) or many (array).

        Returns a ``{"roll", "tilt", "focal"}`` dict for a single query and an
        ``(m, 3)`` array otherwise.
        """
        single = isinstance(cues, (ReliabilityCues, dict)) or np.ndim(cues) == 1
        if isinstance(cues, ReliabilityCues):
            cues = cues.as_array()
        elif isinstance(cues, dict):
            cues = [cues[name] for name in CUE_NAMES]
        Z = self.whiten(cues)
        Zt = self.whiten(self.train_cues)
        out = np.column_stack([knn_predict(Zt, self.train_targets[:, j], Z, k) for j, k in enumerate(self.ks)])
        if single:
            return dict(zip(TARGET_NAMES, map(float, out[0])))
        return out

    def to_dict(self):
        return {
            "format_version": MODEL_FORMAT_VERSION,
            "cue_names": list(CUE_NAMES),
            "target_names": list(TARGET_NAMES),
            "whitening_mean": self.mean.tolist(),
            "whitening_matrix": self.W.tolist(),
            "train_cues": self.train_cues.tolist(),
            "train_targets": self.train_targets.tolist(),
            "k": dict(zip(TARGET_NAMES, map(int, self.ks))),
            "seed": self.seed,
        }

    @classmethod
    def from_dict(cls, d):
        from .io import check_version

        check_version(d, MODEL_FORMAT_VERSION, "reliability model")
        return cls(
            train_cues=np.asarray(d["train_cues"], dtype=float),
            train_targets=np.asarray(d["train_targets"], dtype=float),
            mean=np.asarray(d["whitening_mean"], dtype=float),
            W=np.asarray(d["whitening_matrix"], dtype=float),
            ks=tuple(int(d["k"][name]) for name in TARGET_NAMES),
            seed=int(d.get("seed", 0)),
        )


class InsufficientDataError(ValueError):
    pass


def fit_model(cues, targets, k_grid=DEFAULT_K_GRID, folds=5, seed=0):
    """Fit the whitened KNN error predictor.

    Args:
        cues: ``(n, 3)`` cue matrix (or a list of :class:`ReliabilityCues`).
        targets: ``(n, 3)`` absolute roll error, tilt error (deg) and focal
            error (%).
    """
    if len(cues) and isinstance(cues[0], ReliabilityCues):
        cues = [c.as_array() for c in cues]
    X = np.asarray(cues, dtype=float)
    Y = np.asarray(targets, dtype=float)
    if X.ndim != 2 or X.shape[1] != len(CUE_NAMES) or Y.shape != (len(X), len(TARGET_NAMES)):
        raise ValueError(f"expected (n, 3) cues and targets, got {X.shape} and {Y.shape}")
    if len(X) < 10:
        raise InsufficientDataError(f"need at least 10 training rows, got {len(X)}")
    if not (np.all(np.isfinite(X)) and np.all(np.isfinite(Y))):
        raise ValueError("training data must be finite")
    mean, W = whitening(X)
    Z = (X - mean) @ W.T
    ks = tuple(select_k(Z, Y[:, j], k_grid, folds, seed)[0] for j in range(Y.shape[1]))
    return ReliabilityModel(X, Y, mean, W, ks, seed)


def gate_indices(predicted, fraction):
    """Indices of the ``ceil(fraction * n / 100)`` lowest predicted errors.

    Sorted by predicted error; ties keep input order, so smaller fractions
    always select a prefix of larger ones.
    """
    if not 0 < fraction <= 100:
        raise ValueError(f"fraction must lie in (0, 100], got {fraction}")
    predicted = np.asarray(predicted, dtype=float).ravel()
    m = math.ceil(fraction * predicted.size / 100.0 - 1e-9)
    return np.argsort(predicted, kind="stable")[:m]


def gate(items, predicted, fraction):
    """The ``fraction`` percent of ``items`` with the lowest predicted error."""
    return [items[i] for i in gate_indices(predicted, fraction)]
