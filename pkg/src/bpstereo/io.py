"""Dataset loading and result writing (PFM, PNG, plain-text light files)."""

from __future__ import annotations

import json
import re
import warnings
from dataclasses import dataclass
from pathlib import Path

import cv2
import numpy as np

from .core import Dataset, DatasetError, LightingConfig, NormalMapResult, ProjectionModel, Status

STATUS_COLOURS = {
    Status.OUTSIDE: (0, 0, 0),
    Status.CONVERGED: (0, 160, 0),
    Status.SCHERZER_BREAK: (255, 255, 255),
    Status.MAX_ITERS: (220, 0, 0),
    Status.STALLED: (230, 200, 0),
    Status.SKIPPED: (0, 80, 220),
}

_IMAGE_RE = re.compile(r"image_(\d+)\.(png|pfm)$", re.IGNORECASE)


class LoadError(DatasetError):
    """A dataset file is missing or cannot be parsed."""


# --------------------------------------------------------------------------
# PFM


def write_pfm(path, data) -> None:
    """Write a 1- or 3-channel little-endian float32 PFM, top row first in memory."""
    data = np.asarray(data, dtype="<f4")
    if data.ndim == 2:
        header = b"Pf"
    elif data.ndim == 3 and data.shape[2] == 3:
        header = b"PF"
    else:
        raise ValueError(f"PFM needs (H, W) or (H, W, 3) data, got {data.shape}")
    h, w = data.shape[:2]
    with open(path, "wb") as f:
        f.write(header + b"\n")
        f.write(f"{w} {h}\n".encode())
        f.write(b"-1.0\n")
        # PFM stores rows bottom to top
        f.write(np.ascontiguousarray(data[::-1]).tobytes())


def read_pfm(path) -> np.ndarray:
    path = Path(path)
    try:
        with open(path, "rb") as f:
            kind = f.readline().strip()
            dims = f.readline().split()
            scale = float(f.readline().strip())
            raw = f.read()
    except (OSError, ValueError) as exc:
        raise LoadError(f"{path}: cannot read PFM ({exc})") from exc
    if kind not in (b"PF", b"Pf") or len(dims) != 2:
        raise LoadError(f"{path}: not a PFM file")
    w, h = int(dims[0]), int(dims[1])
    channels = 3 if kind == b"PF" else 1
    dtype = "<f4" if scale < 0 else ">f4"
    n = w * h * channels
    if len(raw) < 4 * n:
        raise LoadError(f"{path}: truncated PFM data")
    data = np.frombuffer(raw[: 4 * n], dtype=dtype).astype(np.float32)
    shape = (h, w, 3) if channels == 3 else (h, w)
    return data.reshape(shape)[::-1].copy()


# --------------------------------------------------------------------------
# generic images


def read_image(path) -> np.ndarray:
    """Grayscale float64 image in [0, 1].

    Integer images are divided by their maximal code value, float images are
    clamped to [0, 1] (with a warning when clamping happens), colour images
    are averaged over channels.
    """
    path = Path(path)
    if not path.exists():
        raise LoadError(f"{path}: file not found")
    if path.suffix.lower() == ".pfm":
        img = read_pfm(path).astype(np.float64)
    else:
        raw = cv2.imread(str(path), cv2.IMREAD_UNCHANGED)
        if raw is None:
            raise LoadError(f"{path}: cannot decode image")
        if raw.dtype == np.uint8:
            img = raw.astype(np.float64) / 255.0
        elif raw.dtype == np.uint16:
            img = raw.astype(np.float64) / 65535.0
        elif np.issubdtype(raw.dtype, np.floating):
            img = raw.astype(np.float64)
        else:
            raise LoadError(f"{path}: unsupported pixel type {raw.dtype}")
        if img.ndim == 3 and img.shape[2] == 4:
            img = img[..., :3]
    if img.ndim == 3:
        img = img.mean(axis=2)
    if not np.all(np.isfinite(img)):
        raise LoadError(f"{path}: non-finite pixel values")
    if img.min() < 0.0 or img.max() > 1.0:
        warnings.warn(f"{path.name}: values outside [0, 1] clamped", stacklevel=2)
        img = np.clip(img, 0.0, 1.0)
    return img


def write_png(path, data) -> None:
    """Write uint8/uint16 grayscale or RGB (channel order R, G, B)."""
    data = np.asarray(data)
    if data.ndim == 3:
        data = data[..., ::-1]
    if not cv2.imwrite(str(path), np.ascontiguousarray(data)):
        raise OSError(f"{path}: cannot write PNG")


def to_uint8(rgb01) -> np.ndarray:
    return np.round(np.clip(rgb01, 0.0, 1.0) * 255.0).astype(np.uint8)


# --------------------------------------------------------------------------
# dataset layout


@dataclass(frozen=True)
class LoadConfig:
    projection: ProjectionModel = ProjectionModel()


def _read_matrix(path: Path, what: str) -> np.ndarray:
    try:
        arr = np.loadtxt(path, dtype=np.float64, ndmin=2)
    except (OSError, ValueError) as exc:
        raise LoadError(f"{path}: cannot parse {what} ({exc})") from exc
    if not np.all(np.isfinite(arr)):
        raise LoadError(f"{path}: non-finite values in {what}")
    return arr


def _image_files(root: Path) -> list[Path]:
    found = []
    for p in root.iterdir():
        m = _IMAGE_RE.match(p.name)
        if m:
            found.append((int(m.group(1)), p.suffix.lower() != ".pfm", p))
    if found:
        found.sort()
        seen, files = set(), []
        for idx, _, p in found:
            # prefer the lossless PFM when both formats exist
            if idx not in seen:
                seen.add(idx)
                files.append(p)
        return files
    listing = root / "filenames.txt"
    if listing.exists():
        names = [ln.strip() for ln in listing.read_text().splitlines() if ln.strip()]
        return [root / n for n in names]
    raise LoadError(f"{root}: no image_XX.png/pfm files (or filenames.txt) found")


def load_lighting(root: Path, m: int | None = None) -> LightingConfig:
    dfile = root / "light_directions.txt"
    if not dfile.exists():
        raise LoadError(f"{dfile}: file not found")
    dirs = _read_matrix(dfile, "light directions")
    if dirs.shape[1] != 3:
        raise LoadError(f"{dfile}: expected 3 columns, got {dirs.shape[1]}")
    if m is not None and dirs.shape[0] != m:
        raise DatasetError(f"{dfile}: {dirs.shape[0]} lights for {m} images")
    ifile = root / "light_intensities.txt"
    if ifile.exists():
        ints = _read_matrix(ifile, "light intensities")
        if ints.shape[0] != dirs.shape[0]:
            raise LoadError(f"{ifile}: {ints.shape[0]} rows for {dirs.shape[0]} lights")
        if ints.shape[1] == 1:
            diffuse = specular = ints[:, 0]
        elif ints.shape[1] == 2:
            diffuse, specular = ints[:, 0], ints[:, 1]
        elif ints.shape[1] == 3:
            # per-channel intensities, reduced like the images
            diffuse = specular = ints.mean(axis=1)
        else:
            raise LoadError(f"{ifile}: expected 1, 2 or 3 columns")
    else:
        diffuse = specular = np.ones(dirs.shape[0])
    return LightingConfig(dirs, diffuse, specular)


def load_dataset(root, config: LoadConfig | None = None) -> Dataset:
    """Load ``image_XX`` files, light files and an optional ``mask.png``."""
    root = Path(root)
    config = config or LoadConfig()
    if not root.is_dir():
        raise LoadError(f"{root}: not a directory")
    files = _image_files(root)
    if len(files) < 3:
        raise DatasetError(f"m >= 3 required, found {len(files)} images")
    images = [read_image(p) for p in files]
    shape = images[0].shape
    for p, img in zip(files, images):
        if img.shape != shape:
            raise DatasetError(f"{p.name}: shape {img.shape} differs from {shape}")
    lighting = load_lighting(root, len(images))
    mfile = root / "mask.png"
    if mfile.exists():
        raw = cv2.imread(str(mfile), cv2.IMREAD_UNCHANGED)
        if raw is None:
            raise LoadError(f"{mfile}: cannot decode image")
        mask = (raw.max(axis=2) if raw.ndim == 3 else raw) > 0
        if mask.shape != shape:
            raise DatasetError(f"mask shape {mask.shape} differs from image shape {shape}")
    else:
        mask = np.ones(shape, dtype=bool)
    return Dataset(np.stack(images), mask, lighting, config.projection)


def write_dataset(ds: Dataset, out_dir, fmt: str = "pfm") -> None:
    """Write ``ds`` in the layout :func:`load_dataset` reads."""
    out = Path(out_dir)
    out.mkdir(parents=True, exist_ok=True)
    for k, img in enumerate(ds.images):
        clipped = np.maximum(img, 0.0)
        if fmt == "pfm":
            write_pfm(out / f"image_{k + 1:02d}.pfm", clipped)
        elif fmt == "png":
            write_png(out / f"image_{k + 1:02d}.png", np.round(np.clip(clipped, 0, 1) * 65535).astype(np.uint16))
        else:
            raise ValueError(f"unknown image format {fmt!r}")
    write_png(out / "mask.png", ds.mask.astype(np.uint8) * 255)
    np.savetxt(out / "light_directions.txt", ds.lighting.directions, fmt="%.17g")
    np.savetxt(
        out / "light_intensities.txt",
        np.column_stack([ds.lighting.diffuse_intensities, ds.lighting.specular_intensities]),
        fmt="%.17g",
    )


def read_mask(path) -> np.ndarray:
    raw = cv2.imread(str(path), cv2.IMREAD_UNCHANGED)
    if raw is None:
        raise LoadError(f"{path}: cannot decode mask")
    return (raw.max(axis=2) if raw.ndim == 3 else raw) > 0


# --------------------------------------------------------------------------
# results


def status_image(status: np.ndarray) -> np.ndarray:
    rgb = np.zeros(status.shape + (3,), dtype=np.uint8)
    for s, colour in STATUS_COLOURS.items():
        rgb[status == s] = colour
    return rgb


def save_result(out_dir, result: NormalMapResult, report: dict, extra_masks: dict | None = None) -> Path:
    """Write normals.pfm, normals_rgb.png, status.png, report.json and material maps."""
    from .synth import colorize_normals

    out = Path(out_dir)
    out.mkdir(parents=True, exist_ok=True)
    normals = np.where(result.mask[..., None], result.normals, 0.0)
    write_pfm(out / "normals.pfm", normals)
    write_png(out / "normals_rgb.png", to_uint8(colorize_normals(normals, result.mask)))
    write_png(out / "status.png", status_image(result.status))
    write_pfm(out / "albedo.pfm", np.where(result.mask, result.albedo, 0.0))
    if result.r_map is not None:
        write_pfm(out / "r.pfm", np.where(result.mask, result.r_map, 0.0))
        alpha = np.where(result.mask & np.isfinite(result.alpha_map), result.alpha_map, 0.0)
        write_pfm(out / "alpha.pfm", alpha)
    for name, m in (extra_masks or {}).items():
        write_png(out / f"{name}.png", np.asarray(m, dtype=np.uint8) * 255)
    path = out / "report.json"
    path.write_text(json.dumps(report, indent=2, sort_keys=True, default=_json_default) + "\n")
    return path


def _json_default(obj):
    if isinstance(obj, np.generic):
        return obj.item()
    if isinstance(obj, np.ndarray):
        return obj.tolist()
    if hasattr(obj, "value"):
        return obj.value
    raise TypeError(f"not JSON serialisable: {type(obj).__name__}")
