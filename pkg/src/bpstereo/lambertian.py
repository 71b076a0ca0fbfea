"""Classical (Woodham) photometric stereo."""

from __future__ import annotations

from dataclasses import dataclass

import numpy as np

from .core import LightingConfig

ALBEDO_EPS = 1e-8
RANK_RTOL = 1e-10


class DegenerateLightingError(ValueError):
    pass


@dataclass(frozen=True)
class LightMatrix:
    """Rows ``l_k L_k^T`` with a cached pseudoinverse."""

    L: np.ndarray
    rank: int
    pinv: np.ndarray

    @property
    def m(self) -> int:
        return self.L.shape[0]


def build_light_matrix(lighting: LightingConfig) -> LightMatrix:
    L = lighting.diffuse_intensities[:, None] * lighting.directions
    U, sv, Vt = np.linalg.svd(L, full_matrices=False)
    rank = int(np.count_nonzero(sv > RANK_RTOL * sv[0])) if sv[0] > 0 else 0
    if rank < 3:
        raise DegenerateLightingError(
            f"light matrix has rank {rank} < 3 (coplanar directions or zero intensities)"
        )
    pinv = (Vt.T / sv) @ U.T
    L.setflags(write=False)
    pinv.setflags(write=False)
    return LightMatrix(L, rank, pinv)


def solve_classical_ps(Lmat: LightMatrix, I) -> tuple[np.ndarray, float, np.ndarray, bool]:
    """Least-squares scaled normal for one pixel.

    Returns ``(N, albedo, unit_normal, ok)``. ``ok`` is False for dark pixels
    (``|N| <= 1e-8``), in which case ``unit_normal`` is ``(0, 0, 1)``.
    """
    N = Lmat.pinv @ np.asarray(I, dtype=np.float64)
    albedo = float(np.linalg.norm(N))
    if albedo <= ALBEDO_EPS:
        return N, albedo, np.array([0.0, 0.0, 1.0]), False
    return N, albedo, N / albedo, True


def solve_classical_ps_batch(Lmat: LightMatrix, I: np.ndarray, min_intensity: float = 0.0):
    """Vectorised solve for ``I`` of shape (m, P).

    Returns ``(N, albedo, unit, ok)`` with N and unit of shape (P, 3).
    ``min_intensity`` > 0 drops observations below it from each pixel's fit.
    """
    I = np.asarray(I, dtype=np.float64)
    if min_intensity > 0:
        N = np.empty((I.shape[1], 3))
        for j in range(I.shape[1]):
            keep = I[:, j] >= min_intensity
            N[j] = np.linalg.lstsq(Lmat.L[keep], I[keep, j], rcond=None)[0] if keep.sum() >= 3 else 0.0
    else:
        N = (Lmat.pinv @ I).T
    albedo = np.linalg.norm(N, axis=1)
    ok = albedo > ALBEDO_EPS
    unit = np.zeros_like(N)
    unit[:, 2] = 1.0
    unit[ok] = N[ok] / albedo[ok, None]
    return N, albedo, unit, ok
