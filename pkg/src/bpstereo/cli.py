"""Command-line front end: ``solve``, ``render`` and ``eval``.

Settings for ``solve`` resolve as flags > ``--config`` JSON file > defaults.
The JSON file is a flat object whose keys mirror the long flag names
(``"scherzer-cap": 2000`` or ``"scherzer_cap": 2000``).
"""

from __future__ import annotations

import argparse
import json
import logging
import sys
import time
from dataclasses import asdict, dataclass, field
from pathlib import Path

import numpy as np

from .core import DatasetError, LightingConfig, ProjectionMode, ProjectionModel
from .io import LoadConfig, load_dataset, read_mask, read_pfm, save_result, write_dataset, write_pfm
from .noise import invert_noise_level
from .pipeline import RunConfig, highlight_mask, resolve_workers, run, run_ps, scherzer_map
from .rlm import RlmConfig
from .synth import NOISE_GENERATOR, SphereScene, aae, render_sphere

log = logging.getLogger("bpstereo")

SOLVE_DEFAULTS = {
    "model": "blinn-phong",
    "sigma": 0.01,
    "confidence": 0.95,
    "rho": 0.5,
    "tau": 2.5,
    "scherzer_cap": 2000.0,
    "ctf_levels": 1,
    "max_iters": 50,
    "perspective": False,
    "focal": None,
    "principal_point": None,
    "raw_view": False,
    "sequential": False,
    "workers": 0,
    "init_r": 0.01,
    "init_alpha": 10.0,
    "upsample": "bilinear",
}


class CliError(Exception):
    pass


class _Parser(argparse.ArgumentParser):
    def error(self, message):
        # one-line diagnostic instead of argparse's usage dump
        raise CliError(message)


@dataclass
class CliConfig:
    subcommand: str
    settings: dict = field(default_factory=dict)

    def run_config(self) -> RunConfig:
        s = self.settings
        rlm = RlmConfig(rho=s["rho"], tau=s["tau"], scherzer_cap=s["scherzer_cap"], max_iters=s["max_iters"])
        return RunConfig(
            model=s["model"].replace("-", "_"),
            rlm=rlm,
            sigma=s["sigma"],
            confidence=s["confidence"],
            ctf_levels=s["ctf_levels"],
            init_r=s["init_r"],
            init_alpha=s["init_alpha"],
            parallel=not s["sequential"],
            workers=s["workers"],
            upsample=s["upsample"],
        )

    def projection(self) -> ProjectionModel:
        s = self.settings
        if not s["perspective"]:
            if s["focal"] is not None:
                raise ValueError("--focal requires --perspective")
            return ProjectionModel(raw_view=s["raw_view"])
        if s["focal"] is None:
            raise ValueError("--perspective requires --focal")
        pp = tuple(s["principal_point"]) if s["principal_point"] is not None else None
        return ProjectionModel(ProjectionMode.PERSPECTIVE, float(s["focal"]), pp, s["raw_view"])


def _build_parser() -> argparse.ArgumentParser:
    p = _Parser(prog="bpstereo", description="Blinn-Phong photometric stereo with regularising LM")
    p.add_argument("-v", "--verbose", action="store_true")
    sub = p.add_subparsers(dest="subcommand", required=True, parser_class=_Parser)

    s = sub.add_parser("solve", help="estimate normals from a dataset directory")
    s.add_argument("--input", type=Path)
    s.add_argument("--out", type=Path)
    s.add_argument("--config", type=Path, help="flat JSON file of settings")
    s.add_argument("--model", choices=["lambertian", "blinn-phong"])
    s.add_argument("--sigma", type=float)
    s.add_argument("--confidence", type=float)
    s.add_argument("--rho", type=float)
    s.add_argument("--tau", type=float)
    s.add_argument("--scherzer-cap", type=float)
    s.add_argument("--ctf-levels", type=int)
    s.add_argument("--max-iters", type=int)
    s.add_argument("--perspective", action="store_const", const=True)
    s.add_argument("--focal", type=float)
    s.add_argument("--principal-point", type=float, nargs=2, metavar=("CX", "CY"))
    s.add_argument("--raw-view", action="store_const", const=True)
    s.add_argument("--sequential", action="store_const", const=True)
    s.add_argument("--workers", type=int)
    s.add_argument("--init-r", type=float)
    s.add_argument("--init-alpha", type=float)
    s.add_argument("--upsample", choices=["nearest", "bilinear"])

    r = sub.add_parser("render", help="render a noisy Blinn-Phong sphere dataset")
    r.add_argument("--out", required=True, type=Path)
    r.add_argument("--size", type=int, default=128)
    r.add_argument("--lights-file", type=Path)
    r.add_argument("--rho-d", type=float, default=SphereScene.rho_d)
    r.add_argument("--rho-s", type=float, default=SphereScene.rho_s)
    r.add_argument("--alpha", type=float, default=SphereScene.alpha)
    r.add_argument("--sigma", type=float, default=SphereScene.sigma)
    r.add_argument("--seed", type=int, default=0)
    r.add_argument("--radius-fraction", type=float, default=SphereScene.radius_fraction)

    e = sub.add_parser("eval", help="average angular error between two normal maps")
    e.add_argument("--est", required=True, type=Path)
    e.add_argument("--gt", required=True, type=Path)
    e.add_argument("--mask", type=Path)
    return p


def _file_settings(path: Path) -> dict:
    try:
        data = json.loads(path.read_text())
    except FileNotFoundError as exc:
        raise CliError(f"{path}: config file not found") from exc
    except json.JSONDecodeError as exc:
        raise CliError(f"{path}: invalid JSON ({exc.msg})") from exc
    if not isinstance(data, dict):
        raise CliError(f"{path}: config must be a JSON object")
    out = {}
    for key, value in data.items():
        k = key.replace("-", "_")
        if k not in SOLVE_DEFAULTS:
            raise CliError(f"{path}: unknown setting {key!r}")
        out[k] = value
    return out


def parse_args(argv) -> CliConfig:
    ns = _build_parser().parse_args(argv)
    args = vars(ns)
    if ns.subcommand != "solve":
        return CliConfig(ns.subcommand, args)
    settings = dict(SOLVE_DEFAULTS)
    if ns.config is not None:
        settings.update(_file_settings(ns.config))
    settings.update({k: v for k, v in args.items() if k in SOLVE_DEFAULTS and v is not None})
    settings.update(input=ns.input, out=ns.out, verbose=ns.verbose)
    cfg = CliConfig("solve", settings)
    # surface validation errors before touching any data
    cfg.run_config()
    cfg.projection()
    if ns.input is None or ns.out is None:
        raise CliError("solve requires --input DIR and --out DIR")
    return cfg


def _solve(cfg: CliConfig) -> None:
    s = cfg.settings
    run_cfg = cfg.run_config()
    ds = load_dataset(s["input"], LoadConfig(cfg.projection()))
    t0 = time.perf_counter()
    result = run(ds, run_cfg)
    elapsed = time.perf_counter() - t0

    report = {
        "config": {**run_cfg.to_dict(), "projection": _projection_dict(ds.projection), "input": str(s["input"])},
        "workers": resolve_workers(run_cfg.workers) if run_cfg.parallel else 1,
        "pixels": int(ds.mask.sum()),
        "status_counts": result.status_counts(),
        "runtime_s": round(elapsed, 3),
    }
    if run_cfg.model == "blinn_phong":
        report["delta"] = invert_noise_level(run_cfg.confidence, run_cfg.sigma, ds.m)
    extra = {}
    gt_file = Path(s["input"]) / "gt_normals.pfm"
    if gt_file.exists():
        gt = read_pfm(gt_file).astype(np.float64)
        if gt.shape == result.normals.shape:
            report["aae_deg"] = aae(result.normals, gt, ds.mask)
            if run_cfg.model == "blinn_phong":
                report["aae_ps_deg"] = aae(run_ps(ds).normals, gt, ds.mask)
    if run_cfg.model == "blinn_phong":
        ps = run_ps(ds)
        extra["scherzer_breaks"] = scherzer_map(result)
        extra["highlights"] = highlight_mask(ps.normals, ds)
    save_result(s["out"], result, report, extra)
    summary = ", ".join(f"{k}={v}" for k, v in report["status_counts"].items())
    print(f"wrote {s['out']} ({summary})")
    if "aae_deg" in report:
        print(f"AAE: {report['aae_deg']:.3f}")


def _projection_dict(p: ProjectionModel) -> dict:
    return {
        "mode": p.mode.value,
        "focal_length_px": p.focal_length_px,
        "principal_point": p.principal_point,
        "raw_view": p.raw_view,
    }


def _render(args: dict) -> None:
    kwargs = {}
    if args["lights_file"] is not None:
        try:
            dirs = np.loadtxt(args["lights_file"], ndmin=2)
        except (OSError, ValueError) as exc:
            raise DatasetError(f"{args['lights_file']}: cannot read light directions ({exc})") from exc
        kwargs["lighting"] = LightingConfig.from_directions(dirs)
    scene = SphereScene(
        image_size=args["size"],
        radius_fraction=args["radius_fraction"],
        rho_d=args["rho_d"],
        rho_s=args["rho_s"],
        alpha=args["alpha"],
        sigma=args["sigma"],
        seed=args["seed"],
        **kwargs,
    )
    ds, gt = render_sphere(scene)
    out = args["out"]
    write_dataset(ds, out)
    write_pfm(out / "gt_normals.pfm", gt.normals)
    meta = {k: v for k, v in asdict(scene).items() if k != "lighting"}
    meta.update(generator=NOISE_GENERATOR, r=gt.r, a=gt.a, lights=ds.lighting.m)
    (out / "report.json").write_text(json.dumps(meta, indent=2, sort_keys=True) + "\n")
    print(f"wrote {out} ({ds.m} images, {int(ds.mask.sum())} pixels)")


def _eval(args: dict) -> None:
    est = read_pfm(args["est"]).astype(np.float64)
    gt = read_pfm(args["gt"]).astype(np.float64)
    if est.shape != gt.shape or est.ndim != 3:
        raise DatasetError(f"normal map shapes differ: {est.shape} vs {gt.shape}")
    if args["mask"] is not None:
        mask = read_mask(args["mask"])
        if mask.shape != est.shape[:2]:
            raise DatasetError(f"mask shape {mask.shape} differs from {est.shape[:2]}")
    else:
        mask = np.linalg.norm(gt, axis=-1) > 0.5
    print(f"AAE: {aae(est, gt, mask):.3f}")


def run_cli(argv=None) -> int:
    argv = sys.argv[1:] if argv is None else list(argv)
    try:
        cfg = parse_args(argv)
        logging.basicConfig(level=logging.INFO if cfg.settings.get("verbose") else logging.WARNING)
        if cfg.subcommand == "solve":
            _solve(cfg)
        elif cfg.subcommand == "render":
            _render(cfg.settings)
        else:
            _eval(cfg.settings)
    except SystemExit as exc:  # --help
        return int(exc.code or 0)
    except (CliError, ValueError, OSError) as exc:
        print(f"bpstereo: error: {exc}", file=sys.stderr)
        return 2
    return 0


def main() -> None:
    sys.exit(run_cli())
