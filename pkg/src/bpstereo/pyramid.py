"""Coarse-to-fine image pyramid and propagation of per-pixel unknowns."""

from __future__ import annotations

import warnings
from collections import deque
from dataclasses import dataclass

import numpy as np

from .core import Dataset, ProjectionModel

MIN_COARSE_PIXELS = 16


@dataclass(frozen=True)
class Pyramid:
    """``levels[0]`` is the input resolution.

    ``sigma_factor[L]`` scales the noise std-dev at level L: ``2**-L`` where the
    pixel averages a complete block of in-mask fine pixels, otherwise 1.
    """

    levels: list[Dataset]
    sigma_factor: list[np.ndarray]

    def __len__(self) -> int:
        return len(self.levels)


def _coarse_center(center: tuple[float, float]) -> tuple[float, float]:
    # pixel centers at integer coordinates: coarse pixel i covers fine 2i, 2i+1
    return (center[0] + 0.5) / 2.0 - 0.5, (center[1] + 0.5) / 2.0 - 0.5


def _blocks(a: np.ndarray, fill=0) -> np.ndarray:
    """Pad the last two axes to even size and expose 2x2 blocks as trailing axes."""
    h, w = a.shape[-2:]
    pad = [(0, 0)] * (a.ndim - 2) + [(0, h % 2), (0, w % 2)]
    a = np.pad(a, pad, constant_values=fill)
    h2, w2 = a.shape[-2] // 2, a.shape[-1] // 2
    a = a.reshape(a.shape[:-2] + (h2, 2, w2, 2))
    return np.moveaxis(a, -3, -2).reshape(a.shape[:-4] + (h2, w2, 4))


def downsample(ds: Dataset, full: np.ndarray) -> tuple[Dataset, np.ndarray] | None:
    """Halve ``ds``; returns None when the coarse mask would be empty."""
    mask_b = _blocks(ds.mask, fill=False)
    counts = mask_b.sum(axis=-1)
    coarse_mask = counts >= 2
    if not coarse_mask.any():
        return None
    img_b = _blocks(np.where(ds.mask, ds.images, 0.0))
    sums = img_b.sum(axis=-1)
    coarse = np.where(coarse_mask, sums / np.maximum(counts, 1), 0.0)
    coarse_full = coarse_mask & (counts == 4) & _blocks(full, fill=False).all(axis=-1)

    proj = ds.projection
    new_proj = ProjectionModel(
        mode=proj.mode,
        focal_length_px=proj.focal_length_px / 2.0 if proj.perspective else proj.focal_length_px,
        principal_point=_coarse_center(proj.center(ds.shape)),
        raw_view=proj.raw_view,
    )
    return Dataset(coarse, coarse_mask, ds.lighting, new_proj), coarse_full


def build_pyramid(ds: Dataset, num_levels: int) -> Pyramid:
    if num_levels < 1:
        raise ValueError("num_levels must be >= 1")
    levels = [ds]
    full = ds.mask.copy()
    factors = [np.ones(ds.shape)]
    for level in range(1, num_levels):
        nxt = downsample(levels[-1], full)
        if nxt is None or np.count_nonzero(nxt[0].mask) < MIN_COARSE_PIXELS:
            warnings.warn(
                f"pyramid truncated to {len(levels)} levels (coarse mask too small)", stacklevel=2
            )
            break
        coarse, full = nxt
        levels.append(coarse)
        factors.append(np.where(full, 2.0**-level, 1.0))
    return Pyramid(levels, factors)


def nearest_in_mask(mask: np.ndarray) -> np.ndarray:
    """For each grid cell, the flat index of the nearest in-mask cell.

    Multi-source breadth-first search over the 4-neighbour grid; sources are
    seeded in C order, so ties resolve deterministically.
    """
    h, w = mask.shape
    src = np.full(h * w, -1, dtype=np.int64)
    flat = np.flatnonzero(mask)
    if flat.size == 0:
        raise ValueError("coarse mask is empty")
    src[flat] = flat
    queue = deque(flat.tolist())
    while queue:
        idx = queue.popleft()
        i, j = divmod(idx, w)
        for ni, nj in ((i - 1, j), (i + 1, j), (i, j - 1), (i, j + 1)):
            if 0 <= ni < h and 0 <= nj < w:
                n = ni * w + nj
                if src[n] < 0:
                    src[n] = src[idx]
                    queue.append(n)
    return src.reshape(h, w)


def upsample_init(
    coarse_x: np.ndarray, coarse_mask: np.ndarray, fine_shape, fine_mask, mode: str = "bilinear"
) -> np.ndarray:
    """Propagate a coarse (H', W', n) unknowns map to the finer grid.

    Coarse cells outside the mask are first filled from the nearest in-mask
    cell, so fine pixels with an out-of-mask parent copy their in-mask
    neighbour. ``mode="nearest"`` then replicates each parent into its 2x2
    children; ``mode="bilinear"`` interpolates between coarse pixel centers
    (identical on constant fields). Returns (H, W, n), zero outside ``fine_mask``.
    """
    if mode not in ("nearest", "bilinear"):
        raise ValueError(f"unknown upsampling mode {mode!r}")
    coarse_x = np.asarray(coarse_x, dtype=np.float64)
    src = nearest_in_mask(np.asarray(coarse_mask, dtype=bool))
    filled = coarse_x.reshape(-1, coarse_x.shape[-1])[src]
    h, w = fine_shape
    if mode == "nearest":
        rows = np.minimum(np.arange(h) // 2, src.shape[0] - 1)
        cols = np.minimum(np.arange(w) // 2, src.shape[1] - 1)
        out = filled[rows[:, None], cols[None, :]]
    else:
        # fine pixel centre i sits at coarse coordinate i/2 - 1/4
        cr = np.clip(np.arange(h) / 2.0 - 0.25, 0, src.shape[0] - 1)
        cc = np.clip(np.arange(w) / 2.0 - 0.25, 0, src.shape[1] - 1)
        r0 = np.minimum(cr.astype(int), src.shape[0] - 1)
        c0 = np.minimum(cc.astype(int), src.shape[1] - 1)
        r1 = np.minimum(r0 + 1, src.shape[0] - 1)
        c1 = np.minimum(c0 + 1, src.shape[1] - 1)
        fr = (cr - r0)[:, None, None]
        fc = (cc - c0)[None, :, None]
        top = filled[r0][:, c0] * (1 - fc) + filled[r0][:, c1] * fc
        bot = filled[r1][:, c0] * (1 - fc) + filled[r1][:, c1] * fc
        out = top * (1 - fr) + bot * fr
    return np.where(np.asarray(fine_mask, dtype=bool)[..., None], out, 0.0)
