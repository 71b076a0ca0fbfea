"""Per-pixel orchestration: classical PS, Blinn-Phong RLM fits, diagnostic maps."""

from __future__ import annotations

import logging
import math
import os
from concurrent.futures import ProcessPoolExecutor
from dataclasses import asdict, dataclass, field

import numpy as np

from .blinn_phong import halfway_vectors, jacobian, reflectance, view_direction
from .core import Dataset, NormalMapResult, Status
from .lambertian import ALBEDO_EPS, build_light_matrix, solve_classical_ps_batch
from .noise import invert_noise_level
from .pyramid import build_pyramid, upsample_init
from .rlm import NumericalFailure, RlmConfig, RlmStatus, rlm_solve

log = logging.getLogger(__name__)

HIGHLIGHT_COSINE = 0.99

_STATUS_OF = {
    RlmStatus.DISCREPANCY_STOP: Status.CONVERGED,
    RlmStatus.SCHERZER_BREAK: Status.SCHERZER_BREAK,
    RlmStatus.MAX_ITERS: Status.MAX_ITERS,
    RlmStatus.STALLED: Status.STALLED,
}


@dataclass(frozen=True)
class RunConfig:
    model: str = "blinn_phong"
    rlm: RlmConfig = field(default_factory=RlmConfig)
    sigma: float = 0.01
    confidence: float = 0.95
    ctf_levels: int = 1
    init_r: float = 0.01
    init_alpha: float = 10.0
    parallel: bool = True
    workers: int = 0  # 0 = PS_THREADS or CPU count
    min_intensity: float = 0.0
    upsample: str = "bilinear"

    def __post_init__(self):
        if self.model not in ("lambertian", "blinn_phong"):
            raise ValueError(f"unknown model {self.model!r}")
        if not self.init_alpha > 1:
            raise ValueError("init_alpha must be > 1")
        if not self.sigma > 0:
            raise ValueError("sigma must be > 0")
        if not 0 < self.confidence < 1:
            raise ValueError("confidence must lie in (0, 1)")
        if self.ctf_levels < 1:
            raise ValueError("ctf_levels must be >= 1")

    @property
    def init_a(self) -> float:
        return math.log(self.init_alpha - 1.0)

    def to_dict(self) -> dict:
        d = asdict(self)
        d["rlm"] = asdict(self.rlm)
        return d


def resolve_workers(requested: int = 0) -> int:
    if requested > 0:
        return requested
    env = int(os.environ.get("PS_THREADS", "0") or 0)
    return env if env > 0 else (os.cpu_count() or 1)


def _pixel_halfways(ds: Dataset) -> np.ndarray:
    """(P, m, 3) halfway vectors for the in-mask pixels, or (m, 3) if shared."""
    if not ds.projection.perspective:
        return halfway_vectors(ds.lighting, view_direction(ds.projection, np.zeros(2))).H
    return halfway_vectors(ds.lighting, view_direction(ds.projection, ds.pixel_coordinates())).H


def run_ps(ds: Dataset, min_intensity: float = 0.0) -> NormalMapResult:
    """Classical PS on every in-mask pixel; dark pixels are marked skipped."""
    Lmat = build_light_matrix(ds.lighting)
    rows, cols = ds.pixel_indices()
    Y = ds.images[:, rows, cols]
    N, albedo, unit, ok = solve_classical_ps_batch(Lmat, Y, min_intensity)
    out = NormalMapResult.empty(ds.shape, ds.mask)
    out.normals[rows, cols] = unit
    out.scaled_normals[rows, cols] = N
    out.albedo[rows, cols] = albedo
    out.status[rows, cols] = np.where(ok, Status.CONVERGED, Status.SKIPPED)
    out.residual[rows, cols] = np.linalg.norm(Lmat.L @ N.T - Y, axis=0)
    return out


def _solve_chunk(LD, hs, Y, H, X0, deltas, cfg: RlmConfig):
    """Solve a batch of pixels; pure function of its arguments."""
    P = Y.shape[0]
    X = X0.copy()
    status = np.empty(P, dtype=np.uint8)
    iters = np.zeros(P, dtype=np.int32)
    resid = np.empty(P)
    shared_H = H.ndim == 2
    for p in range(P):
        Hp = H if shared_H else H[p]
        prob = _Pixel(LD, hs, Hp, Y[p])
        try:
            res = rlm_solve(prob, X0[p], cfg.with_delta(deltas[p]))
        except NumericalFailure:
            status[p] = Status.SKIPPED
            with np.errstate(over="ignore", invalid="ignore"):
                resid[p] = float(np.linalg.norm(Y[p] - reflectance(X0[p], LD, hs, Hp)))
            continue
        X[p] = res.x
        status[p] = _STATUS_OF[res.status]
        iters[p] = res.iters
        resid[p] = res.final_residual
    return X, status, iters, resid


class _Pixel:
    __slots__ = ("LD", "hs", "H", "y_delta")

    def __init__(self, LD, hs, H, y):
        self.LD, self.hs, self.H, self.y_delta = LD, hs, H, y

    def forward(self, x):
        return reflectance(x, self.LD, self.hs, self.H)

    def jacobian(self, x):
        return jacobian(x, self.LD, self.hs, self.H)


def _solve_pixels(LD, hs, Y, H, X0, deltas, cfg: RlmConfig, parallel: bool, workers: int):
    P = Y.shape[0]
    if not parallel or workers <= 1 or P < 2 * workers:
        return _solve_chunk(LD, hs, Y, H, X0, deltas, cfg)
    bounds = np.linspace(0, P, min(P, 4 * workers) + 1).astype(int)
    chunks = list(zip(bounds[:-1], bounds[1:]))

    with ProcessPoolExecutor(max_workers=workers) as ex:
        futures = [
            ex.submit(_solve_chunk, LD, hs, Y[lo:hi], H if H.ndim == 2 else H[lo:hi], X0[lo:hi], deltas[lo:hi], cfg)
            for lo, hi in chunks
        ]
        parts = [f.result() for f in futures]
    return tuple(np.concatenate([pt[i] for pt in parts]) for i in range(4))


def _solve_level(ds: Dataset, X0: np.ndarray, sigma_map: np.ndarray, cfg: RunConfig):
    rows, cols = ds.pixel_indices()
    Y = np.ascontiguousarray(ds.images[:, rows, cols].T)
    H = _pixel_halfways(ds)
    sig = sigma_map[rows, cols]
    deltas = np.array([invert_noise_level(cfg.confidence, float(s), ds.m) for s in sig])
    LD = ds.lighting.diffuse_intensities[:, None] * ds.lighting.directions
    hs = np.asarray(ds.lighting.specular_intensities)
    workers = resolve_workers(cfg.workers)
    return _solve_pixels(LD, hs, Y, H, X0, deltas, cfg.rlm, cfg.parallel, workers)


def run_bp(ds: Dataset, cfg: RunConfig) -> NormalMapResult:
    """Blinn-Phong fit initialised by classical PS, optionally coarse-to-fine."""
    pyr = build_pyramid(ds, cfg.ctf_levels)
    x_init = None
    for level in range(len(pyr) - 1, -1, -1):
        lds = pyr.levels[level]
        rows, cols = lds.pixel_indices()
        ps = run_ps(lds, cfg.min_intensity)
        dark = ps.status[rows, cols] == Status.SKIPPED
        if x_init is None:
            X0 = np.empty((rows.size, 5))
            X0[:, :3] = ps.scaled_normals[rows, cols]
            X0[:, 3] = cfg.init_r
            X0[:, 4] = cfg.init_a
        else:
            X0 = x_init[rows, cols]
        X, status, iters, resid = _solve_level(lds, X0, cfg.sigma * pyr.sigma_factor[level], cfg)
        X[dark] = X0[dark]
        status[dark] = Status.SKIPPED
        log.info("level %d: %d pixels, %s", level, rows.size, np.bincount(status, minlength=6)[1:].tolist())
        if level > 0:
            xmap = np.zeros(lds.shape + (5,))
            xmap[rows, cols] = X
            finer = pyr.levels[level - 1]
            x_init = upsample_init(xmap, lds.mask, finer.shape, finer.mask, cfg.upsample)

    out = NormalMapResult.empty(ds.shape, ds.mask, with_material=True)
    N = X[:, :3]
    albedo = np.linalg.norm(N, axis=1)
    good = albedo > ALBEDO_EPS
    unit = np.tile([0.0, 0.0, 1.0], (rows.size, 1))
    unit[good] = N[good] / albedo[good, None]
    status = np.where(good, status, Status.SKIPPED).astype(np.uint8)
    out.normals[rows, cols] = unit
    out.scaled_normals[rows, cols] = N
    out.albedo[rows, cols] = albedo
    out.r_map[rows, cols] = X[:, 3]
    out.a_map[rows, cols] = X[:, 4]
    with np.errstate(over="ignore"):
        out.alpha_map[rows, cols] = 1.0 + np.exp(X[:, 4])
    out.status[rows, cols] = status
    out.residual[rows, cols] = resid
    out.iterations[rows, cols] = iters
    return out


def run(ds: Dataset, cfg: RunConfig) -> NormalMapResult:
    if cfg.model == "lambertian":
        return run_ps(ds, cfg.min_intensity)
    return run_bp(ds, cfg)


def highlight_mask(normals: np.ndarray, ds: Dataset, threshold: float = HIGHLIGHT_COSINE) -> np.ndarray:
    """Pixels where some halfway vector is within ``arccos(threshold)`` of the PS normal."""
    rows, cols = ds.pixel_indices()
    H = _pixel_halfways(ds)
    n = np.asarray(normals)[rows, cols]
    if H.ndim == 2:
        cos = n @ H.T
    else:
        cos = np.einsum("pkc,pc->pk", H, n)
    out = np.zeros(ds.shape, dtype=bool)
    out[rows, cols] = cos.max(axis=1) >= threshold
    return out


def scherzer_map(result: NormalMapResult) -> np.ndarray:
    return (result.status == Status.SCHERZER_BREAK) & result.mask
