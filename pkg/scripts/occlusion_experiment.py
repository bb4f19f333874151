"""Occlusion sweep for a trained checkpoint on a saved dataset.

    python scripts/occlusion_experiment.py --weights runs/desk/rec/recnet.pt --data DIR --out DIR
"""

import argparse
import json
from pathlib import Path

from platerec.checkpoint import load_checkpoint
from platerec.evaluator import OcclusionConfig, occlusion_sweep, select_occlusion_frames
from platerec.experiment import nondecreasing_within, occlusion_by_radius
from platerec.plots import plot_occlusion
from platerec.synth import load_dataset


def main():
    ap = argparse.ArgumentParser(description=__doc__.split("\n")[0])
    ap.add_argument("--weights", type=Path, required=True)
    ap.add_argument("--data", type=Path, required=True)
    ap.add_argument("--out", type=Path, default=Path("runs/occlusion"))
    ap.add_argument("--radii", type=int, nargs="+", default=[0, 3, 5, 7, 9, 11])
    ap.add_argument("--counts", type=int, nargs="+", default=[1, 2, 3, 4, 5])
    ap.add_argument("--frames", type=int, default=4)
    ap.add_argument("--per-cell", type=int, default=10)
    ap.add_argument("--seed", type=int, default=0)
    ap.add_argument("--no-segment", action="store_true")
    args = ap.parse_args()

    ck = load_checkpoint(args.weights)
    odnet = None if args.no_segment else ck.get("odnet")
    ds = load_dataset(args.data)
    cfg = OcclusionConfig(tuple(args.radii), tuple(args.counts), args.per_cell, n_frames=args.frames,
                          seed=args.seed)
    fr = select_occlusion_frames(ds, cfg.n_frames, seed=cfg.seed)
    res = occlusion_sweep(ck["recnet"], ds.images[fr], ds.surfaces[ds.state_ids(fr)], ds.footprints[fr],
                          cfg, odnet)
    args.out.mkdir(parents=True, exist_ok=True)
    (args.out / "occlusion.json").write_text(json.dumps(res.to_dict(), indent=1) + "\n")
    plot_occlusion(res, args.out / "occlusion.png")
    curve = occlusion_by_radius(res)
    for r, v in zip(res.radii, curve):
        print(f"radius {r:3d}: mean e3d {v:.5f}")
    print("non-decreasing within 5%:", nondecreasing_within(curve, 0.05))


if __name__ == "__main__":
    main()
