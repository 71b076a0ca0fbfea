"""Blinn-Phong photometric stereo solved per pixel by a regularising
Levenberg-Marquardt scheme, with classical PS, noise-level estimation,
coarse-to-fine initialisation and a synthetic sphere renderer."""

from .core import (
    Dataset,
    DatasetError,
    LightingConfig,
    NormalMapResult,
    PixelUnknowns,
    ProjectionMode,
    ProjectionModel,
    Status,
)
from .noise import NoiseSpec, invert_noise_level, noise_ball_probability
from .pipeline import RunConfig, highlight_mask, run, run_bp, run_ps, scherzer_map
from .rlm import RlmConfig, RlmResult, RlmStatus, rlm_solve, scherzer_local, solve_alpha
from .synth import SphereScene, aae, render_sphere

__all__ = [
    "Dataset",
    "DatasetError",
    "LightingConfig",
    "NoiseSpec",
    "NormalMapResult",
    "PixelUnknowns",
    "ProjectionMode",
    "ProjectionModel",
    "RlmConfig",
    "RlmResult",
    "RlmStatus",
    "RunConfig",
    "SphereScene",
    "Status",
    "aae",
    "highlight_mask",
    "invert_noise_level",
    "noise_ball_probability",
    "render_sphere",
    "rlm_solve",
    "run",
    "run_bp",
    "run_ps",
    "scherzer_local",
    "scherzer_map",
    "solve_alpha",
]
