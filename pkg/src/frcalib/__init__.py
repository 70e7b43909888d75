"""Joint focal length and rotation estimation from Manhattan line segments."""

from .deviation import LineSegment, Measure
from .geometry import (
    CameraParams,
    EulerAngles,
    Intrinsics,
    euler_to_rotation,
    focal_to_fov,
    fov_to_focal,
    frame_angle_error,
    rotation_to_euler,
    vanishing_points,
)
from .likelihood import MixtureConfig, ProcessLabel, classify_segments, mixture_likelihood, objective
from .reliability import ReliabilityCues, ReliabilityModel, fit_model, gate
from .search import CalibrationResult, SearchConfig, calibrate, grid_stage, refine
from .synth import SynthConfig, generate

__version__ = "0.1.0"

__all__ = [
    "CalibrationResult",
    "CameraParams",
    "EulerAngles",
    "Intrinsics",
    "LineSegment",
    "Measure",
    "MixtureConfig",
    "ProcessLabel",
    "ReliabilityCues",
    "ReliabilityModel",
    "SearchConfig",
    "SynthConfig",
    "calibrate",
    "classify_segments",
    "euler_to_rotation",
    "fit_model",
    "focal_to_fov",
    "fov_to_focal",
    "frame_angle_error",
    "gate",
    "generate",
    "grid_stage",
    "mixture_likelihood",
    "objective",
    "refine",
    "rotation_to_euler",
    "vanishing_points",
]
