"""Command-line entry point.

    platerec dataset gen|masks|backgrounds ...
    platerec train od|rec ...
    platerec segment ...
    platerec reconstruct ...
    platerec eval ...

Exit codes: 0 success, 1 other failure, 2 usage, 3 I/O, 4 numeric abort.
Failures print one line ``error[<category>]: <message>`` to stderr.
"""

from __future__ import annotations

import argparse
import json
import logging
import os
import sys
from pathlib import Path

import numpy as np

from . import __version__
from .errors import ConfigError, NumericError, PlateRecError

DATA_ENV = "PLATEREC_DATA"
EXIT_USAGE, EXIT_IO, EXIT_NUMERIC = 2, 3, 4

log = logging.getLogger("platerec")


def data_root() -> Path:
    return Path(os.environ.get(DATA_ENV, "data"))


def _add_config_args(p):
    p.add_argument("--config", type=Path, help="JSON file with config fields")
    p.add_argument("--set", dest="overrides", action="append", default=[], metavar="KEY=VALUE",
                   help="override a config field (repeatable, dotted keys for nested fields)")


def build_parser() -> argparse.ArgumentParser:
    ap = argparse.ArgumentParser(prog="platerec", description=__doc__.split("\n")[0])
    ap.add_argument("--version", action="version", version=__version__)
    ap.add_argument("-v", "--verbose", action="store_true")
    sub = ap.add_subparsers(dest="command", required=True)

    ds = sub.add_parser("dataset", help="generate synthetic data").add_subparsers(dest="action", required=True)
    g = ds.add_parser("gen", help="render a thin-plate dataset")
    g.add_argument("--states", type=int)
    g.add_argument("--textures", type=int)
    g.add_argument("--cams", type=int)
    g.add_argument("--lights", type=int)
    g.add_argument("--renders-per-state", type=int)
    g.add_argument("--textureless", action="store_true", default=None)
    g.add_argument("--seed", type=int)
    g.add_argument("--out", type=Path, help=f"output directory (default ${DATA_ENV}/dataset)")
    _add_config_args(g)
    m = ds.add_parser("masks", help="composite frames over backgrounds for OD-Net training")
    m.add_argument("--frames", type=Path, required=True, help="dataset directory")
    m.add_argument("--backgrounds", type=Path, required=True, help="directory of background PNGs")
    m.add_argument("--count", type=int, default=1000)
    m.add_argument("--seed", type=int, default=0)
    m.add_argument("--out", type=Path, required=True)
    b = ds.add_parser("backgrounds", help="write the built-in procedural backgrounds")
    b.add_argument("--out", type=Path, required=True)
    b.add_argument("--per-kind", type=int, default=3)
    b.add_argument("--size", type=int, default=224)
    b.add_argument("--seed", type=int, default=0)

    t = sub.add_parser("train", help="train OD-Net or Rec-Net")
    t.add_argument("stage", choices=("od", "rec"))
    t.add_argument("--data", type=Path, help=f"mask set (od) or dataset (rec); default ${DATA_ENV}/...")
    t.add_argument("--out", type=Path, required=True)
    t.add_argument("--seed", type=int)
    t.add_argument("--odnet", type=Path, help="checkpoint used to segment Rec-Net inputs")
    _add_config_args(t)

    s = sub.add_parser("segment", help="foreground mask for one image")
    s.add_argument("--weights", type=Path, required=True)
    s.add_argument("--in", dest="inp", type=Path, required=True)
    s.add_argument("--out-mask", type=Path, required=True)
    s.add_argument("--out-seg", type=Path, required=True)
    s.add_argument("--threshold", help="otsu or fixed:<t>")

    r = sub.add_parser("reconstruct", help="3D point grid for one image")
    r.add_argument("--weights", type=Path, required=True)
    r.add_argument("--in", dest="inp", type=Path, required=True)
    r.add_argument("--out", type=Path, required=True, help="little-endian float32 grid")
    r.add_argument("--no-segment", action="store_true")
    r.add_argument("--odnet", type=Path, help="OD-Net checkpoint if --weights has none")

    e = sub.add_parser("eval", help="evaluate a trained Rec-Net on a dataset")
    e.add_argument("--weights", type=Path, required=True)
    e.add_argument("--data", type=Path)
    e.add_argument("--report", type=Path, required=True)
    e.add_argument("--split", choices=("train", "test"), default="test")
    e.add_argument("--occlusion", action="store_true")
    e.add_argument("--throughput", action="store_true")
    e.add_argument("--no-segment", action="store_true")
    e.add_argument("--plots", type=Path, help="directory for PNG figures")
    e.add_argument("--seed", type=int, default=0)
    return ap


# ---------------------------------------------------------------- helpers


def _read_image(path: Path, size: int) -> np.ndarray:
    from PIL import Image

    if not path.exists():
        raise FileNotFoundError(f"no image at {path}")
    img = Image.open(path).convert("RGB")
    if img.size != (size, size):
        log.warning("resizing %s from %dx%d to %dx%d", path, *img.size, size, size)
        img = img.resize((size, size), Image.BILINEAR)
    return np.asarray(img)


def _load(path: Path, *need: str) -> dict:
    from .checkpoint import load_checkpoint

    ck = load_checkpoint(path)
    missing = [n for n in need if n not in ck]
    if missing:
        raise ConfigError(f"{path} holds no {', '.join(missing)} weights")
    return ck


# --------------------------------------------------------------- commands


def cmd_dataset(args) -> None:
    from .config import config_dict, parse_overrides, resolve, write_snapshot
    from .synth import DatasetConfig, generate_dataset, save_dataset

    if args.action == "backgrounds":
        from PIL import Image
        from .experiment import default_backgrounds

        args.out.mkdir(parents=True, exist_ok=True)
        for i, bg in enumerate(default_backgrounds(args.per_kind, args.size, args.seed)):
            Image.fromarray(bg).save(args.out / f"background_{i:03d}.png")
        print(args.out)
        return
    if args.action == "masks":
        return _dataset_masks(args)
    flags = {"states": args.states, "textures": args.textures, "cameras": args.cams,
             "lights": args.lights, "renders_per_state": args.renders_per_state,
             "textureless": args.textureless, "seed": args.seed}
    overrides = {k: v for k, v in flags.items() if v is not None}
    overrides.update(parse_overrides(args.overrides))
    cfg = resolve(DatasetConfig, args.config, overrides)
    out = args.out or data_root() / "dataset"
    ds = generate_dataset(cfg)
    save_dataset(ds, out)
    write_snapshot(out, config_dict(cfg))
    print(f"{out}: {cfg.states} states, {len(ds.manifest.frames)} frames, "
          f"{len(ds.manifest.test)} test states")


def _dataset_masks(args) -> None:
    from PIL import Image
    from .synth import load_dataset
    from .synth.masks import build_mask_dataset, save_mask_set

    if not args.backgrounds.is_dir():
        raise FileNotFoundError(f"no background directory at {args.backgrounds}")
    paths = sorted(p for p in args.backgrounds.iterdir() if p.suffix.lower() in (".png", ".jpg", ".jpeg"))
    if not paths:
        raise FileNotFoundError(f"no PNG/JPEG backgrounds in {args.backgrounds}")
    ds = load_dataset(args.frames)
    size = ds.images.shape[1]
    bgs = [np.asarray(Image.open(p).convert("RGB").resize((size, size), Image.BILINEAR)) for p in paths]
    frames = [ds.frame(i) for i in ds.frame_indices("train")]
    samples = build_mask_dataset(frames, bgs, args.count, seed=args.seed)
    save_mask_set(samples, args.out, meta={"frames": str(args.frames), "count": args.count,
                                           "seed": args.seed, "backgrounds": len(bgs)})
    print(f"{args.out}: {len(samples)} samples")


def cmd_train(args) -> None:
    from .checkpoint import load_checkpoint
    from .config import config_dict, parse_overrides, resolve, write_snapshot
    from .trainer import TrainConfig

    overrides = parse_overrides(args.overrides)
    if args.seed is not None:
        overrides["seed"] = args.seed
    cfg = resolve(TrainConfig, args.config, overrides)
    snapshot = {"stage": args.stage, "train": config_dict(cfg)}
    if args.stage == "od":
        from .experiment import run_od_stage
        from .synth.masks import load_mask_set

        data = args.data or data_root() / "masks"
        snapshot["data"] = str(data)
        write_snapshot(args.out, snapshot)
        train, test = load_mask_set(data)
        stage = run_od_stage(train + test, cfg, args.out)
        print(f"{args.out}: final mse {stage.history[-1]['mse']:.5f}, "
              f"held-out IoU {stage.test_iou.mean():.4f}")
        return

    from .experiment import run_rec_stage
    from .plots import plot_history
    from .synth import load_dataset

    data = args.data or data_root() / "dataset"
    odnet = None
    if cfg.segment_inputs:
        if args.odnet is None:
            raise ConfigError("segment_inputs is on: pass --odnet or --set segment_inputs=false")
        odnet = load_checkpoint(args.odnet).get("odnet")
        if odnet is None:
            raise ConfigError(f"{args.odnet} holds no odnet weights")
    snapshot.update(data=str(data), odnet=str(args.odnet) if odnet is not None else None)
    write_snapshot(args.out, snapshot)
    res = run_rec_stage(load_dataset(data), cfg, odnet, args.out)
    plot_history(res.history, args.out / "history.png")
    last = res.history[-1]
    print(f"{args.out}: l3d {last.l3d:.3f} liso {last.liso:.3f} lg {last.lg:.4f} ld {last.ld:.4f}")


def cmd_segment(args) -> None:
    from PIL import Image
    from .segmenter import segment

    model = _load(args.weights, "odnet")["odnet"]
    img = _read_image(args.inp, model.config.in_size)
    res = segment(model, img, args.threshold)
    mask = np.zeros(img.shape[:2], np.uint8) if res.mask is None else res.mask.astype(np.uint8)
    for p in (args.out_mask, args.out_seg):
        p.parent.mkdir(parents=True, exist_ok=True)
    Image.fromarray(mask * 255).save(args.out_mask)
    Image.fromarray(res.segmented).save(args.out_seg)
    print(json.dumps({"fallback": res.fallback, "foreground": int(mask.sum())}))


def cmd_reconstruct(args) -> None:
    from .reconstructor import reconstruct
    from .segmenter import segment
    from .synth.dataset import write_surface

    ck = _load(args.weights, "recnet")
    model = ck["recnet"]
    img = _read_image(args.inp, model.config.in_size)
    fallback = None
    if not args.no_segment:
        odnet = ck.get("odnet") or (_load(args.odnet, "odnet")["odnet"] if args.odnet else None)
        if odnet is None:
            raise ConfigError("no OD-Net available: pass --odnet or --no-segment")
        seg = segment(odnet, img)
        img, fallback = seg.segmented, seg.fallback
    surface = reconstruct(model, img)
    args.out.parent.mkdir(parents=True, exist_ok=True)
    write_surface(args.out, surface.points)
    print(json.dumps({"out": str(args.out), "grid": list(surface.points.shape), "fallback": fallback}))


def cmd_eval(args) -> None:
    from .config import write_snapshot
    from .evaluator import (
        OcclusionConfig,
        evaluate,
        measure_throughput,
        occlusion_sweep,
        select_occlusion_frames,
    )
    from .synth import load_dataset

    ck = _load(args.weights, "recnet")
    model = ck["recnet"]
    odnet = None if args.no_segment else ck.get("odnet")
    data = args.data or data_root() / "dataset"
    ds = load_dataset(data)
    report = evaluate(model, ds, odnet, args.split)
    occ = None
    if args.occlusion:
        cfg = OcclusionConfig(seed=args.seed)
        fr = select_occlusion_frames(ds, cfg.n_frames, seed=cfg.seed)
        occ = occlusion_sweep(model, ds.images[fr], ds.surfaces[ds.state_ids(fr)], ds.footprints[fr],
                              cfg, odnet)
        report.occlusion = occ.to_dict()
    if args.throughput:
        idx = ds.frame_indices(args.split)[:10]
        report.timing = measure_throughput(model, ds.images[idx], odnet)
    args.report.parent.mkdir(parents=True, exist_ok=True)
    args.report.write_text(json.dumps(report.to_dict(), indent=1) + "\n")
    write_snapshot(args.report.parent, {"weights": str(args.weights), "config_hash": ck["config_hash"],
                                        "data": str(data), "split": args.split,
                                        "segment": odnet is not None, "seed": args.seed},
                   name=args.report.stem + ".config")
    if args.plots:
        from .plots import plot_e3d_histograms, plot_occlusion

        args.plots.mkdir(parents=True, exist_ok=True)
        tex = {f.index: f.texture_id for f in ds.manifest.frames}
        groups: dict = {}
        for i, err in zip(report.frame_index, report.frame_e3d):
            groups.setdefault(f"texture {tex[i]}", []).append(err)
        plot_e3d_histograms(dict(sorted(groups.items())), args.plots / "e3d_hist.png")
        if occ is not None:
            plot_occlusion(occ, args.plots / "occlusion.png")
    print(f"{args.report}: e3d {report.e3d_mean:.5f} +- {report.e3d_std:.5f} over {report.count} frames")


COMMANDS = {"dataset": cmd_dataset, "train": cmd_train, "segment": cmd_segment,
            "reconstruct": cmd_reconstruct, "eval": cmd_eval}


def _fail(category: str, msg: str, code: int) -> int:
    print(f"error[{category}]: {' '.join(str(msg).split())}", file=sys.stderr)
    return code


def dispatch(argv=None) -> int:
    parser = build_parser()
    try:
        args = parser.parse_args(argv)
    except SystemExit as exc:
        return int(exc.code or 0)
    logging.basicConfig(level=logging.INFO if args.verbose else logging.WARNING,
                        format="%(levelname)s %(name)s: %(message)s")
    try:
        COMMANDS[args.command](args)
    except NumericError as exc:
        return _fail(exc.category, exc, EXIT_NUMERIC)
    except ConfigError as exc:
        return _fail("usage", exc, EXIT_USAGE)
    except (OSError, EOFError) as exc:
        return _fail("io", exc, EXIT_IO)
    except PlateRecError as exc:
        return _fail(exc.category, exc, 1)
    except ValueError as exc:
        return _fail("value", exc, 1)
    return 0


def main() -> None:
    sys.exit(dispatch())


if __name__ == "__main__":
    main()
