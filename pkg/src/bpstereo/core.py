"""Domain data model: lighting, projection, datasets and per-pixel results."""

from __future__ import annotations

import enum
import warnings
from dataclasses import dataclass, field

import numpy as np


class DatasetError(ValueError):
    """Raised when a dataset is malformed or violates its invariants."""


class Status(enum.IntEnum):
    """Per-pixel outcome code stored in status maps (0 marks out-of-mask)."""

    OUTSIDE = 0
    CONVERGED = 1
    SCHERZER_BREAK = 2
    MAX_ITERS = 3
    STALLED = 4
    SKIPPED = 5


@dataclass(frozen=True)
class LightingConfig:
    directions: np.ndarray
    diffuse_intensities: np.ndarray
    specular_intensities: np.ndarray

    def __post_init__(self):
        d = np.asarray(self.directions, dtype=np.float64)
        if d.ndim != 2 or d.shape[1] != 3:
            raise DatasetError(f"light directions must be m x 3, got shape {d.shape}")
        m = d.shape[0]
        if m < 3:
            raise DatasetError(f"m >= 3 required, got {m} lights")
        norms = np.linalg.norm(d, axis=1)
        if np.any(norms == 0) or not np.all(np.isfinite(norms)):
            raise DatasetError("light directions must be finite and nonzero")
        if np.any(np.abs(norms - 1.0) > 1e-12):
            warnings.warn("light directions were not unit length; normalising", stacklevel=3)
            d = d / norms[:, None]
        ld = np.asarray(self.diffuse_intensities, dtype=np.float64).reshape(-1)
        hs = np.asarray(self.specular_intensities, dtype=np.float64).reshape(-1)
        if ld.shape != (m,) or hs.shape != (m,):
            raise DatasetError("intensity arrays must have one entry per light")
        if np.any(ld < 0) or np.any(hs < 0):
            raise DatasetError("light intensities must be >= 0")
        for name, arr in (("directions", d), ("diffuse_intensities", ld), ("specular_intensities", hs)):
            arr.setflags(write=False)
            object.__setattr__(self, name, arr)

    @classmethod
    def from_directions(cls, directions, diffuse=None, specular=None) -> LightingConfig:
        """Build a config; diffuse defaults to 1 and specular defaults to diffuse."""
        d = np.asarray(directions, dtype=np.float64)
        ld = np.ones(len(d)) if diffuse is None else np.asarray(diffuse, dtype=np.float64)
        hs = ld if specular is None else np.asarray(specular, dtype=np.float64)
        return cls(d, ld, hs)

    @property
    def m(self) -> int:
        return self.directions.shape[0]


class ProjectionMode(str, enum.Enum):
    ORTHOGRAPHIC = "orthographic"
    PERSPECTIVE = "perspective"


@dataclass(frozen=True)
class ProjectionModel:
    mode: ProjectionMode = ProjectionMode.ORTHOGRAPHIC
    focal_length_px: float = 1.0
    # (x, y) = (column, row) in pixels; None means image center
    principal_point: tuple[float, float] | None = None
    # add the unnormalised (x, y, f) to L_k when forming halfway vectors
    raw_view: bool = False

    def __post_init__(self):
        object.__setattr__(self, "mode", ProjectionMode(self.mode))
        if self.mode is ProjectionMode.PERSPECTIVE and not self.focal_length_px > 0:
            raise DatasetError("focal length must be > 0 in perspective mode")

    @property
    def perspective(self) -> bool:
        return self.mode is ProjectionMode.PERSPECTIVE

    def center(self, shape: tuple[int, int]) -> tuple[float, float]:
        if self.principal_point is not None:
            return float(self.principal_point[0]), float(self.principal_point[1])
        h, w = shape
        return (w - 1) / 2.0, (h - 1) / 2.0


def pixel_coordinates(p, projection: ProjectionModel, shape: tuple[int, int]) -> np.ndarray:
    """Centered camera-plane coordinates of pixel ``p = (row, col)``.

    The row axis is flipped so that y grows upward, which keeps camera-facing
    normals at positive z. Accepts arrays of rows/cols as well.
    """
    row, col = p
    cx, cy = projection.center(shape)
    return np.stack([np.asarray(col, dtype=np.float64) - cx, cy - np.asarray(row, dtype=np.float64)], axis=-1)


@dataclass(frozen=True)
class Dataset:
    images: np.ndarray  # (m, H, W) float64
    mask: np.ndarray  # (H, W) bool
    lighting: LightingConfig
    projection: ProjectionModel = field(default_factory=ProjectionModel)

    def __post_init__(self):
        images = np.asarray(self.images, dtype=np.float64)
        mask = np.asarray(self.mask, dtype=bool)
        if images.ndim != 3:
            raise DatasetError(f"images must be an (m, H, W) stack, got shape {images.shape}")
        if images.shape[0] != self.lighting.m:
            raise DatasetError(f"{images.shape[0]} images but {self.lighting.m} lights")
        if images.shape[0] < 3:
            raise DatasetError("m >= 3 required")
        if mask.shape != images.shape[1:]:
            raise DatasetError(f"mask shape {mask.shape} does not match image shape {images.shape[1:]}")
        if not np.all(np.isfinite(images)):
            raise DatasetError("images contain non-finite values")
        if not mask.any():
            raise DatasetError("mask is empty")
        images.setflags(write=False)
        mask.setflags(write=False)
        object.__setattr__(self, "images", images)
        object.__setattr__(self, "mask", mask)

    @property
    def m(self) -> int:
        return self.images.shape[0]

    @property
    def shape(self) -> tuple[int, int]:
        return self.images.shape[1], self.images.shape[2]

    def pixel_indices(self) -> tuple[np.ndarray, np.ndarray]:
        """Row and column indices of the in-mask pixels in C order."""
        return np.nonzero(self.mask)

    def pixel_coordinates(self) -> np.ndarray:
        """(P, 2) centered coordinates of the in-mask pixels."""
        return pixel_coordinates(self.pixel_indices(), self.projection, self.shape)


@dataclass
class PixelUnknowns:
    """The unknowns of one pixel: scaled normal ``N``, specular ``r``, log-shininess ``a``."""

    N: np.ndarray
    r: float = 0.0
    a: float = 0.0

    @classmethod
    def from_vector(cls, x) -> PixelUnknowns:
        x = np.asarray(x, dtype=np.float64)
        return cls(x[:3].copy(), float(x[3]), float(x[4]))

    @classmethod
    def from_material(cls, normal, rho_d: float, rho_s: float, alpha: float) -> PixelUnknowns:
        """Map physical material (unit normal, albedos, shininess > 1) to unknowns."""
        if not alpha > 1:
            raise ValueError("shininess must be > 1")
        n = np.asarray(normal, dtype=np.float64)
        return cls(rho_d * n, rho_s / rho_d**alpha, float(np.log(alpha - 1.0)))

    def to_vector(self) -> np.ndarray:
        return np.array([*self.N, self.r, self.a], dtype=np.float64)

    @property
    def alpha(self) -> float:
        return 1.0 + float(np.exp(self.a))

    @property
    def albedo(self) -> float:
        return float(np.linalg.norm(self.N))


@dataclass
class NormalMapResult:
    """Per-pixel maps; arrays are full-image sized, meaningful only on ``mask``."""

    normals: np.ndarray  # (H, W, 3)
    albedo: np.ndarray  # (H, W)
    status: np.ndarray  # (H, W) uint8 of Status codes
    residual: np.ndarray  # (H, W)
    mask: np.ndarray  # (H, W) bool
    r_map: np.ndarray | None = None
    alpha_map: np.ndarray | None = None
    scaled_normals: np.ndarray | None = None  # (H, W, 3), N before normalisation
    a_map: np.ndarray | None = None
    iterations: np.ndarray | None = None

    @classmethod
    def empty(cls, shape: tuple[int, int], mask: np.ndarray, with_material: bool = False) -> NormalMapResult:
        h, w = shape
        normals = np.zeros((h, w, 3))
        normals[..., 2] = 1.0
        res = cls(
            normals=normals,
            albedo=np.zeros((h, w)),
            status=np.zeros((h, w), dtype=np.uint8),
            residual=np.zeros((h, w)),
            mask=np.asarray(mask, dtype=bool).copy(),
            scaled_normals=np.zeros((h, w, 3)),
            iterations=np.zeros((h, w), dtype=np.int32),
        )
        if with_material:
            res.r_map = np.zeros((h, w))
            res.a_map = np.zeros((h, w))
            res.alpha_map = np.ones((h, w))
        return res

    def status_counts(self) -> dict[str, int]:
        codes = self.status[self.mask]
        return {s.name.lower(): int(np.count_nonzero(codes == s)) for s in Status if s is not Status.OUTSIDE}
