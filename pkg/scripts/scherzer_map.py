"""Where does the local Scherzer constant blow up?

Renders a sharp-specular sphere, runs the Blinn-Phong fit and writes an
overlay of Scherzer-break pixels (white) on the highlight mask (red), plus
the overlap statistic.

    python3 scripts/scherzer_map.py --alpha 200 --rho-s 0.8 --out runs/scherzer
"""

from __future__ import annotations

import argparse
import json
from dataclasses import asdict, dataclass
from pathlib import Path

import numpy as np

from bpstereo.io import write_png
from bpstereo.rlm import RlmConfig
from bpstereo.pipeline import RunConfig, highlight_mask, run_bp, run_ps, scherzer_map
from bpstereo.synth import SphereScene, render_sphere


@dataclass
class ScherzerConfig:
    size: int = 128
    alpha: float = 200.0
    rho_s: float = 0.8
    sigma: float = 0.005
    seed: int = 0
    cap: float = 2000.0
    out: Path = Path("runs/scherzer")


def run(cfg: ScherzerConfig) -> dict:
    scene = SphereScene(cfg.size, rho_s=cfg.rho_s, alpha=cfg.alpha, sigma=cfg.sigma, seed=cfg.seed)
    ds, gt = render_sphere(scene)
    rc = RunConfig(sigma=cfg.sigma, rlm=RlmConfig(scherzer_cap=cfg.cap))
    bp = run_bp(ds, rc)
    hl = highlight_mask(run_ps(ds).normals, ds)
    sm = scherzer_map(bp)

    img = np.zeros(ds.shape + (3,), dtype=np.uint8)
    img[ds.mask] = (60, 60, 60)
    img[hl] = (200, 30, 30)
    img[sm] = (255, 255, 255)
    cfg.out.mkdir(parents=True, exist_ok=True)
    write_png(cfg.out / "scherzer_overlay.png", img)

    breaks = int(sm.sum())
    stats = {
        "breaks": breaks,
        "highlight_pixels": int(hl.sum()),
        "breaks_in_highlights": int((sm & hl).sum()),
        "overlap_ratio": float((sm & hl).sum() / breaks) if breaks else None,
        "status_counts": bp.status_counts(),
    }
    (cfg.out / "scherzer.json").write_text(json.dumps({"config": asdict(cfg), **stats}, indent=2, default=str))
    print(json.dumps(stats, indent=2))
    return stats


def main() -> None:
    d = ScherzerConfig()
    p = argparse.ArgumentParser(description=__doc__.splitlines()[0])
    p.add_argument("--size", type=int, default=d.size)
    p.add_argument("--alpha", type=float, default=d.alpha)
    p.add_argument("--rho-s", type=float, default=d.rho_s)
    p.add_argument("--sigma", type=float, default=d.sigma)
    p.add_argument("--seed", type=int, default=d.seed)
    p.add_argument("--cap", type=float, default=d.cap)
    p.add_argument("--out", type=Path, default=d.out)
    a = p.parse_args()
    run(ScherzerConfig(a.size, a.alpha, a.rho_s, a.sigma, a.seed, a.cap, a.out))


if __name__ == "__main__":
    main()
