"""Mixture likelihood of line segments given camera parameters.

Each segment is explained by one of four processes: the vertical and two
horizontal Manhattan families, or a uniform background. A Manhattan process
scores a segment through the deviation between the segment and that process's
vanishing point; the background density is constant. The calibration objective
is the length-weighted sum of log mixture densities.
"""

from __future__ import annotations

import enum
import math
from dataclasses import dataclass, field, replace
from typing import Callable, Optional

import numpy as np

from .deviation import Measure, as_segment_array, deviations, segment_lengths
from .geometry import HORIZONTAL1, HORIZONTAL2, VERTICAL, CameraParams, Intrinsics, euler_to_rotation_batch

LIKELIHOOD_FLOOR = 1e-300
LOG_DEVIATION_FLOOR = 1e-6
CONFIG_FORMAT_VERSION = "1.0"


class ProcessLabel(enum.IntEnum):
    VERTICAL = 0
    HORIZONTAL1 = 1
    HORIZONTAL2 = 2
    BACKGROUND = 3


# Rotation column carrying each Manhattan process.
PROCESS_COLUMN = {
    ProcessLabel.VERTICAL: VERTICAL,
    ProcessLabel.HORIZONTAL1: HORIZONTAL1,
    ProcessLabel.HORIZONTAL2: HORIZONTAL2,
}
_MANHATTAN = (ProcessLabel.VERTICAL, ProcessLabel.HORIZONTAL1, ProcessLabel.HORIZONTAL2)


@dataclass(frozen=True)
class LikelihoodModel:
    """A one-parameter density over a non-negative deviation.

    ``family`` is ``"exponential"`` (scale = lambda), ``"gaussian"`` (scale =
    sigma, central normal density) or ``"uniform"`` (scale = range).
    """

    family: str
    scale: float

    def __post_init__(self):
        if self.family not in ("exponential", "gaussian", "uniform"):
            raise ValueError(f"unknown likelihood family {self.family!r}")
        if not (math.isfinite(self.scale) and self.scale > 0):
            raise ValueError(f"dispersion must be positive, got {self.scale}")

    def pdf(self, x):
        x = np.asarray(x, dtype=float)
        s = self.scale
        with np.errstate(over="ignore", invalid="ignore"):
            if self.family == "exponential":
                out = np.exp(-x / s) / s
            elif self.family == "gaussian":
                out = np.exp(-0.5 * (x / s) ** 2) / (s * math.sqrt(2.0 * math.pi))
            else:
                out = np.where(x <= s, 1.0 / s, 0.0)
        return np.where(np.isinf(x), 0.0, out)


def component_likelihood(deviation, model):
    """Density of ``model`` at a non-negative deviation; ``inf`` maps to 0."""
    x = np.asarray(deviation, dtype=float)
    if np.any(np.isnan(x)) or np.any(x < 0):
        raise ValueError(f"deviation must be non-negative, got {deviation}")
    out = model.pdf(x)
    return float(out) if out.ndim == 0 else out


# Dispersions fitted on YorkUrbanDB: (family, horizontal, vertical).
TABLE1 = {
    Measure.A: ("exponential", 94.46, 17.26),
    Measure.B: ("exponential", 1.46, 0.57),
    Measure.C: ("exponential", 0.39, 0.53),
    Measure.D: ("gaussian", 1.00, 1.00),
    Measure.E: ("exponential", 0.80, 0.57),
}

DEFAULT_PRIORS = {
    ProcessLabel.VERTICAL: 0.45,
    ProcessLabel.HORIZONTAL1: 0.26,
    ProcessLabel.HORIZONTAL2: 0.26,
    ProcessLabel.BACKGROUND: 0.03,
}

ANGULAR_BACKGROUND_RANGE = 90.0


@dataclass(frozen=True)
class MixtureConfig:
    """Priors and per-process likelihood models for one deviation measure.

    ``background_range`` of ``None`` means 90 degrees for angular measures and
    the image diagonal for pixel measures. ``manhattan_weight``, when set, is
    called as ``weight(segs, vps)`` with ``vps`` of shape ``(P, 3, 3)`` and must
    return a ``(P, 3, n)`` multiplicative factor on the Manhattan likelihoods.
    It is never serialized.
    """

    measure: Measure = Measure.B
    priors: dict = field(default_factory=lambda: dict(DEFAULT_PRIORS))
    horizontal: Optional[LikelihoodModel] = None
    vertical: Optional[LikelihoodModel] = None
    background_range: Optional[float] = None
    length_weighted: bool = True
    manhattan_weight: Optional[Callable] = None

    def __post_init__(self):
        measure = Measure(self.measure)
        object.__setattr__(self, "measure", measure)
        priors = {ProcessLabel[k.upper()] if isinstance(k, str) else ProcessLabel(k): float(v)
                  for k, v in self.priors.items()}
        if set(priors) != set(ProcessLabel):
            raise ValueError("priors must cover all four processes")
        if any(p < 0 for p in priors.values()) or abs(sum(priors.values()) - 1.0) > 1e-12:
            raise ValueError(f"priors must be non-negative and sum to 1, got {priors}")
        object.__setattr__(self, "priors", priors)
        family, h, v = TABLE1[measure]
        if self.horizontal is None:
            object.__setattr__(self, "horizontal", LikelihoodModel(family, h))
        if self.vertical is None:
            object.__setattr__(self, "vertical", LikelihoodModel(family, v))
        if self.background_range is not None and not self.background_range > 0:
            raise ValueError("background_range must be positive")

    @classmethod
    def default(cls, measure=Measure.B, **kwargs):
        return cls(measure=Measure(measure), **kwargs)

    def model_for(self, label):
        return self.vertical if label is ProcessLabel.VERTICAL else self.horizontal

    def background_density(self, width, height):
        if self.background_range is not None:
            rng = self.background_range
        elif self.measure.angular:
            rng = ANGULAR_BACKGROUND_RANGE
        else:
            rng = math.hypot(width, height)
        return 1.0 / rng

    def column_priors(self):
        """Manhattan priors ordered by rotation column."""
        out = np.empty(3)
        for label, col in PROCESS_COLUMN.items():
            out[col] = self.priors[label]
        return out

    def to_dict(self):
        return {
            "format_version": CONFIG_FORMAT_VERSION,
            "measure": self.measure.value,
            "priors": {label.name.lower(): p for label, p in self.priors.items()},
            "horizontal": {"family": self.horizontal.family, "scale": self.horizontal.scale},
            "vertical": {"family": self.vertical.family, "scale": self.vertical.scale},
            "background_range": self.background_range,
            "length_weighted": self.length_weighted,
        }

    @classmethod
    def from_dict(cls, data):
        from .io import check_version

        check_version(data, CONFIG_FORMAT_VERSION, "mixture config")
        measure = Measure(data.get("measure", "b"))
        kwargs = {"measure": measure}
        if "priors" in data:
            kwargs["priors"] = data["priors"]
        for key in ("horizontal", "vertical"):
            if data.get(key) is not None:
                m = data[key]
                kwargs[key] = LikelihoodModel(m.get("family", TABLE1[measure][0]), float(m["scale"]))
        if data.get("background_range") is not None:
            kwargs["background_range"] = float(data["background_range"])
        if "length_weighted" in data:
            kwargs["length_weighted"] = bool(data["length_weighted"])
        return cls(**kwargs)


def _resolve(measure, config):
    if config is None:
        return MixtureConfig.default(Measure.B if measure is None else measure)
    if measure is not None and Measure(measure) is not config.measure:
        raise ValueError(f"measure {Measure(measure).value!r} does not match config measure "
                         f"{config.measure.value!r}")
    return config


def manhattan_likelihoods(segs, K, R, config):
    """Per-column Manhattan component densities, shape ``(P, 3, n)``."""
    dev = deviations(config.measure, segs, K, R)
    lik = np.empty_like(dev)
    lik[:, VERTICAL] = config.vertical.pdf(dev[:, VERTICAL])
    lik[:, [HORIZONTAL1, HORIZONTAL2]] = config.horizontal.pdf(dev[:, [HORIZONTAL1, HORIZONTAL2]])
    if config.manhattan_weight is not None:
        vps = np.swapaxes(np.asarray(K) @ R, -1, -2)
        lik = lik * config.manhattan_weight(segs, vps)
    return lik


def batch_log_mixture(segs, pan, roll, tilt, hfov, width, height, config):
    """Log mixture density of every segment for ``P`` parameter proposals.

    Angles and FOV are arrays of length ``P`` in degrees; returns ``(P, n)``.
    """
    R = euler_to_rotation_batch(pan, roll, tilt)
    hfov = np.asarray(hfov, dtype=float).ravel()
    f = width / (2.0 * np.tan(np.deg2rad(hfov) / 2.0))
    K = np.zeros((f.size, 3, 3))
    K[:, 0, 0] = K[:, 1, 1] = f
    K[:, 0, 2], K[:, 1, 2], K[:, 2, 2] = width / 2.0, height / 2.0, 1.0
    lik = manhattan_likelihoods(segs, K, R, config)
    mix = np.einsum("k,pkn->pn", config.column_priors(), lik)
    mix += config.priors[ProcessLabel.BACKGROUND] * config.background_density(width, height)
    return np.log(np.maximum(mix, LIKELIHOOD_FLOOR))


def batch_objective(segs, pan, roll, tilt, hfov, width, height, config, weights=None):
    """Length-weighted log likelihood for each of ``P`` proposals."""
    logp = batch_log_mixture(segs, pan, roll, tilt, hfov, width, height, config)
    if weights is None:
        weights = segment_lengths(segs) if config.length_weighted else np.ones(len(segs))
    return logp @ weights


def _params_arrays(params):
    a = params.angles
    return [a.pan], [a.roll], [a.tilt], [params.hfov]


def mixture_likelihood(segment, params: CameraParams, measure=None, config=None):
    """Mixture density of a single segment under ``params``."""
    config = _resolve(measure, config)
    segs = as_segment_array([segment])
    intr = params.intrinsics
    lik = manhattan_likelihoods(segs, intr.K, params.rotation[None], config)[0, :, 0]
    bg = config.priors[ProcessLabel.BACKGROUND] * config.background_density(intr.width, intr.height)
    return float(config.column_priors() @ lik + bg)


def objective(segments, params: CameraParams, measure=None, config=None):
    """Sum over segments of ``length * log p(segment | params)``."""
    config = _resolve(measure, config)
    segs = as_segment_array(segments)
    if len(segs) == 0:
        raise ValueError("no segments")
    intr = params.intrinsics
    return float(batch_objective(segs, *_params_arrays(params), intr.width, intr.height, config)[0])


def log_deviation_objective(segments, params: CameraParams, measure=Measure.B):
    """Non-probabilistic ablation: ``-sum log(delta)`` with the best vp per segment.

    Each segment is matched to its nearest vanishing point; deviations are
    clamped at ``LOG_DEVIATION_FLOOR`` before taking logs. Negated so that,
    like :func:`objective`, larger is better.
    """
    segs = as_segment_array(segments)
    if len(segs) == 0:
        raise ValueError("no segments")
    intr = params.intrinsics
    dev = deviations(measure, segs, intr.K, params.rotation[None])[0]
    best = np.maximum(dev.min(axis=0), LOG_DEVIATION_FLOOR)
    return float(-np.sum(np.log(best)))


@dataclass(frozen=True)
class SegmentScore:
    index: int
    likelihoods: dict
    mixture: float
    label: ProcessLabel

    def responsibilities(self, priors):
        return {m: priors[m] * self.likelihoods[m] / self.mixture for m in ProcessLabel}


def process_likelihoods(segs, params, config):
    """``(n, 4)`` component densities ordered by :class:`ProcessLabel`."""
    intr = params.intrinsics
    lik = manhattan_likelihoods(segs, intr.K, params.rotation[None], config)[0]
    out = np.empty((len(segs), 4))
    for label, col in PROCESS_COLUMN.items():
        out[:, label] = lik[col]
    out[:, ProcessLabel.BACKGROUND] = config.background_density(intr.width, intr.height)
    return out


def responsibilities(segments, params, measure=None, config=None):
    """Posterior process probabilities, ``(n, 4)``; rows sum to one."""
    config = _resolve(measure, config)
    segs = as_segment_array(segments)
    weighted = process_likelihoods(segs, params, config) * np.array([config.priors[m] for m in ProcessLabel])
    return weighted / weighted.sum(axis=1, keepdims=True)


def classify_segments(segments, params, measure=None, config=None):
    """Assign each segment to its most probable generating process."""
    config = _resolve(measure, config)
    segs = as_segment_array(segments)
    lik = process_likelihoods(segs, params, config)
    priors = np.array([config.priors[m] for m in ProcessLabel])
    weighted = lik * priors
    # argmax returns the first maximum: ties go to the lowest label.
    labels = np.argmax(weighted, axis=1)
    return [
        SegmentScore(
            index=i,
            likelihoods={m: float(lik[i, m]) for m in ProcessLabel},
            mixture=float(weighted[i].sum()),
            label=ProcessLabel(int(labels[i])),
        )
        for i in range(len(segs))
    ]


def fit_exponential(deviations_):
    """Maximum-likelihood exponential scale, i.e. the sample mean."""
    x = np.asarray(deviations_, dtype=float).ravel()
    if x.size < 2 or not np.all(np.isfinite(x)) or np.any(x < 0) or not np.any(x > 0):
        raise ValueError("need at least two finite, non-negative, not-all-zero deviations")
    return float(x.mean())


def with_measure(config, measure):
    """Copy of ``config`` switched to ``measure`` with that measure's default dispersions."""
    return replace(config, measure=Measure(measure), horizontal=None, vertical=None)
