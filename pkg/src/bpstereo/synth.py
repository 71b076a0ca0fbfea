"""Synthetic Blinn-Phong sphere renderer, angular error and normal colour coding."""

from __future__ import annotations

from dataclasses import dataclass, field

import numpy as np

from .blinn_phong import halfway_vectors, reflectance, view_direction
from .core import Dataset, LightingConfig, PixelUnknowns, ProjectionModel, pixel_coordinates

NOISE_GENERATOR = "numpy Philox4x64-10, standard_normal over (image, row, col) in C order"


def tilted_lights(tilt_deg: float = 30.0, count: int = 5, azimuth0_deg: float = 20.0) -> np.ndarray:
    """One light on the view axis plus ``count - 1`` lights on a cone of ``tilt_deg``."""
    dirs = [[0.0, 0.0, 1.0]]
    t = np.deg2rad(tilt_deg)
    for k in range(count - 1):
        phi = np.deg2rad(azimuth0_deg) + 2 * np.pi * k / (count - 1)
        dirs.append([np.sin(t) * np.cos(phi), np.sin(t) * np.sin(phi), np.cos(t)])
    return np.array(dirs)


def default_lighting() -> LightingConfig:
    return LightingConfig.from_directions(tilted_lights())


@dataclass(frozen=True)
class SphereScene:
    image_size: int = 128
    radius_fraction: float = 0.9
    rho_d: float = 0.6
    rho_s: float = 0.3
    alpha: float = 20.0
    lighting: LightingConfig = field(default_factory=default_lighting)
    sigma: float = 0.005
    seed: int = 0

    def __post_init__(self):
        if not 0 < self.radius_fraction <= 1:
            raise ValueError("radius_fraction must lie in (0, 1]")
        if not (0 <= self.rho_d <= 1 and 0 <= self.rho_s <= 1):
            raise ValueError("albedos must lie in [0, 1]")
        if self.rho_d == 0:
            raise ValueError("rho_d must be > 0 for the (N, r, a) parametrisation")
        if not self.alpha > 1:
            raise ValueError("shininess must be > 1")
        if self.sigma < 0:
            raise ValueError("sigma must be >= 0")

    @property
    def radius(self) -> float:
        return self.radius_fraction * self.image_size / 2.0

    @property
    def unknowns(self) -> PixelUnknowns:
        return PixelUnknowns.from_material([0.0, 0.0, 1.0], self.rho_d, self.rho_s, self.alpha)


@dataclass
class GroundTruth:
    normals: np.ndarray  # (H, W, 3), zero outside the mask
    mask: np.ndarray
    rho_d: float
    rho_s: float
    alpha: float
    r: float
    a: float


def sphere_normal(x, y, radius: float) -> np.ndarray:
    """Outward unit normal of the camera-facing hemisphere at centered (x, y)."""
    x = np.asarray(x, dtype=np.float64) / radius
    y = np.asarray(y, dtype=np.float64) / radius
    z = np.sqrt(np.maximum(1.0 - x * x - y * y, 0.0))
    return np.stack([x, y, z], axis=-1)


def add_gaussian_noise(images, sigma: float, seed: int) -> np.ndarray:
    """Add IID N(0, sigma^2) to every sample; ``sigma == 0`` returns an exact copy."""
    images = np.array(images, dtype=np.float64)
    if sigma < 0:
        raise ValueError("sigma must be >= 0")
    if sigma == 0:
        return images
    gen = np.random.Generator(np.random.Philox(seed))
    return images + sigma * gen.standard_normal(images.shape)


def render_sphere(scene: SphereScene, projection: ProjectionModel | None = None) -> tuple[Dataset, GroundTruth]:
    """Render the sphere under the BP model; noisy samples may be negative."""
    projection = projection or ProjectionModel()
    n = scene.image_size
    shape = (n, n)
    rows, cols = np.mgrid[0:n, 0:n]
    # the sphere is centered on the image, independent of the principal point
    xy = pixel_coordinates((rows, cols), ProjectionModel(), shape)
    R = scene.radius
    mask = (xy[..., 0] ** 2 + xy[..., 1] ** 2) <= R * R
    normals = np.zeros((n, n, 3))
    normals[mask] = sphere_normal(xy[mask][:, 0], xy[mask][:, 1], R)

    u = scene.unknowns
    light = scene.lighting
    LD = light.diffuse_intensities[:, None] * light.directions
    hs = light.specular_intensities
    images = np.zeros((light.m, n, n))
    pix = np.argwhere(mask)
    cam_xy = pixel_coordinates((pix[:, 0], pix[:, 1]), projection, shape)
    views = view_direction(projection, cam_xy)
    if projection.perspective:
        H_all = halfway_vectors(light, views).H
    else:
        H_all = np.broadcast_to(halfway_vectors(light, views[0]).H, (len(pix), light.m, 3))
    for idx, (i, j) in enumerate(pix):
        x = np.array([*(scene.rho_d * normals[i, j]), u.r, u.a])
        images[:, i, j] = reflectance(x, LD, hs, H_all[idx])

    images = add_gaussian_noise(images, scene.sigma, scene.seed)
    ds = Dataset(images, mask, light, projection)
    gt = GroundTruth(normals, mask, scene.rho_d, scene.rho_s, scene.alpha, u.r, u.a)
    return ds, gt


def _angle_deg(e, g) -> np.ndarray:
    # atan2 form: exact zero for parallel vectors and insensitive to their lengths
    cross = np.linalg.norm(np.cross(e, g), axis=-1)
    return np.degrees(np.arctan2(cross, np.sum(e * g, axis=-1)))


def aae(est, gt, mask) -> float:
    """Average angular error in degrees over ``mask``."""
    mask = np.asarray(mask, dtype=bool)
    if not mask.any():
        raise ValueError("empty mask")
    e = np.asarray(est, dtype=np.float64)[mask]
    g = np.asarray(gt, dtype=np.float64)[mask]
    return float(np.mean(_angle_deg(e, g)))


def angular_error_map(est, gt, mask) -> np.ndarray:
    err = _angle_deg(np.asarray(est, dtype=np.float64), np.asarray(gt, dtype=np.float64))
    return np.where(mask, err, 0.0)


def colorize_normals(normals, mask) -> np.ndarray:
    """RGB in [0, 1]: ``(n + 1) / 2`` per channel, black outside the mask."""
    rgb = (np.asarray(normals, dtype=np.float64) + 1.0) / 2.0
    return np.where(np.asarray(mask, dtype=bool)[..., None], rgb, 0.0)
