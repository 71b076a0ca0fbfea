"""Blinn-Phong reflectance in the (N, r, a) parametrisation.

The unknown vector is ``x = (N1, N2, N3, r, a)`` where ``N`` is the normal
scaled by the diffuse albedo, ``r = rho_s / rho_d**alpha`` and the shininess
is ``alpha = 1 + exp(a)``.
"""

from __future__ import annotations

from dataclasses import dataclass

import numpy as np

from .core import LightingConfig, PixelUnknowns, ProjectionModel


class DegenerateHalfwayError(ValueError):
    pass


def view_direction(projection: ProjectionModel, xy) -> np.ndarray:
    """Viewing direction at camera-plane coordinates ``xy`` (shape (..., 2)).

    Unit length unless ``projection.raw_view`` is set, in which case the
    perspective vector ``(x, y, f)`` is returned as is.
    """
    xy = np.asarray(xy, dtype=np.float64)
    out = np.zeros(xy.shape[:-1] + (3,))
    if not projection.perspective:
        out[..., 2] = 1.0
        return out
    out[..., :2] = xy
    out[..., 2] = projection.focal_length_px
    if projection.raw_view:
        return out
    return out / np.linalg.norm(out, axis=-1, keepdims=True)


@dataclass(frozen=True)
class HalfwaySet:
    H: np.ndarray  # (m, 3) unit rows


def halfway_vectors(lighting: LightingConfig, v) -> HalfwaySet:
    """Unit bisectors of each light direction and the view vector ``v``.

    ``v`` may be a single 3-vector or a (P, 3) stack, giving (P, m, 3).
    """
    v = np.asarray(v, dtype=np.float64)
    H = lighting.directions + v[..., None, :]
    norms = np.linalg.norm(H, axis=-1, keepdims=True)
    if np.any(norms < 1e-12):
        raise DegenerateHalfwayError("light direction opposite to the view direction")
    return HalfwaySet(H / norms)


@dataclass(frozen=True)
class BpPixelProblem:
    """Everything the forward model needs for one pixel."""

    lighting: LightingConfig
    halfways: HalfwaySet
    y_delta: np.ndarray

    def __post_init__(self):
        y = np.asarray(self.y_delta, dtype=np.float64)
        m = self.lighting.m
        if y.shape != (m,) or self.halfways.H.shape != (m, 3):
            raise ValueError("pixel problem dimensions are inconsistent")
        object.__setattr__(self, "y_delta", y)
        # cached for the hot loop
        object.__setattr__(self, "_LD", self.lighting.diffuse_intensities[:, None] * self.lighting.directions)

    @property
    def light_matrix(self) -> np.ndarray:
        return self._LD

    def forward(self, x) -> np.ndarray:
        return reflectance(x, self._LD, self.lighting.specular_intensities, self.halfways.H)

    def jacobian(self, x) -> np.ndarray:
        return jacobian(x, self._LD, self.lighting.specular_intensities, self.halfways.H)


def _as_vector(x) -> np.ndarray:
    if isinstance(x, PixelUnknowns):
        return x.to_vector()
    return np.asarray(x, dtype=np.float64)


def reflectance(x, LD: np.ndarray, hs: np.ndarray, H: np.ndarray) -> np.ndarray:
    """Array-level forward model; ``LD`` holds the rows ``l_k L_k``."""
    N = x[:3]
    s = np.maximum(H @ N, 0.0)
    return LD @ N + x[3] * hs * s ** (1.0 + np.exp(x[4]))


def jacobian(x, LD: np.ndarray, hs: np.ndarray, H: np.ndarray) -> np.ndarray:
    """Array-level m x 5 Jacobian of :func:`reflectance`."""
    N, r, a = x[:3], x[3], x[4]
    ea = np.exp(a)
    s = H @ N
    lit = s > 0.0
    sp = np.where(lit, s, 0.0)
    spec = sp ** (1.0 + ea)
    J = np.empty((LD.shape[0], 5))
    J[:, :3] = LD + (r * hs * (1.0 + ea) * sp**ea)[:, None] * H
    J[:, 3] = hs * spec
    # s**alpha * ln(s) -> 0 as s -> 0; never evaluate ln on the clamped branch
    J[:, 4] = r * hs * ea * spec * np.log(np.where(lit, sp, 1.0))
    return J


def bp_reflectance(x, prob: BpPixelProblem) -> np.ndarray:
    """Predicted intensities for all m lights at one pixel."""
    return prob.forward(_as_vector(x))


def bp_jacobian(x, prob: BpPixelProblem) -> np.ndarray:
    """Analytic derivative of :func:`bp_reflectance` w.r.t. ``(N1, N2, N3, r, a)``."""
    return prob.jacobian(_as_vector(x))
