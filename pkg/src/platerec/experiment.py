"""End-to-end stages shared by the CLI, the scripts and the acceptance suite."""

from __future__ import annotations

import json
import logging
import time
from dataclasses import dataclass, field
from pathlib import Path

import numpy as np

from .checkpoint import save_checkpoint
from .config import config_dict, write_snapshot
from .evaluator import (
    EvalReport,
    OcclusionConfig,
    OcclusionResult,
    evaluate,
    occlusion_sweep,
    select_occlusion_frames,
)
from .segmenter import ODNet, segment_batch
from .synth import Dataset, DatasetConfig, generate_dataset
from .synth.masks import MaskConfig, MaskSample, build_mask_dataset, split_masks, stack
from .synth.textures import BACKGROUND_KINDS, make_background
from .trainer import (
    AdversarialResult,
    TrainConfig,
    mask_iou,
    train_adversarial,
    train_odnet,
    write_history_csv,
)

log = logging.getLogger(__name__)


def default_backgrounds(per_kind: int = 3, size: int = 224, seed: int = 0) -> list[np.ndarray]:
    return [make_background(k, size, seed + i) for k in BACKGROUND_KINDS for i in range(per_kind)]


def mask_set_from_dataset(ds: Dataset, count: int, backgrounds=None, seed: int = 0,
                          cfg: MaskConfig | None = None) -> list[MaskSample]:
    """Composites of training-split frames only, so test frames stay unseen."""
    if backgrounds is None:
        backgrounds = default_backgrounds(size=ds.images.shape[1], seed=seed)
    frames = [ds.frame(i) for i in ds.frame_indices("train")]
    return build_mask_dataset(frames, backgrounds, count, cfg, seed=seed)


@dataclass
class ODStage:
    model: ODNet
    history: list[dict]
    test_iou: np.ndarray
    seconds: float


def run_od_stage(samples: list[MaskSample], cfg: TrainConfig, out_dir=None) -> ODStage:
    train, test = split_masks(samples)
    t0 = time.perf_counter()
    model, history = train_odnet(*stack(train), cfg, out_dir=out_dir)
    iou = mask_iou(model, *stack(test)) if test else np.zeros(0)
    stage = ODStage(model, history, iou, time.perf_counter() - t0)
    if out_dir:
        out = Path(out_dir)
        out.mkdir(parents=True, exist_ok=True)
        save_checkpoint(out / "odnet.pt", extra={"train": config_dict(cfg)}, odnet=model)
        with open(out / "history.csv", "w") as fh:
            fh.write("epoch,mse\n")
            for h in history:
                fh.write(f"{h['epoch']},{h['mse']!r}\n")
        (out / "iou.json").write_text(json.dumps({"mean": float(iou.mean()) if iou.size else None,
                                                  "count": int(iou.size)}, indent=1) + "\n")
    return stage


def rec_inputs(ds: Dataset, split: str, odnet: ODNet | None, segment: bool) -> tuple[np.ndarray, np.ndarray]:
    idx = ds.frame_indices(split)
    images = ds.images[idx]
    if segment and odnet is not None:
        images, _ = segment_batch(odnet, images)
    return images, ds.surfaces[ds.state_ids(idx)]


def run_rec_stage(ds: Dataset, cfg: TrainConfig, odnet: ODNet | None = None, out_dir=None,
                  record_steps: bool = False) -> AdversarialResult:
    images, surfaces = rec_inputs(ds, "train", odnet, cfg.segment_inputs)
    res = train_adversarial(images, surfaces, cfg, out_dir=out_dir, record_steps=record_steps)
    if out_dir:
        out = Path(out_dir)
        out.mkdir(parents=True, exist_ok=True)
        write_history_csv(res.history, out / "history.csv")
        models = {"recnet": res.generator, "discriminator": res.discriminator}
        if odnet is not None:
            models["odnet"] = odnet
        save_checkpoint(out / "recnet.pt", extra={"train": config_dict(cfg)}, **models)
    return res


@dataclass
class DeskResult:
    dataset: Dataset
    od: ODStage | None
    rec: AdversarialResult
    report: EvalReport
    occlusion: OcclusionResult
    timings: dict = field(default_factory=dict)

    def summary(self) -> dict:
        r = self.report
        known = [v["e3d"] for v in r.per_texture.values() if v.get("known")]
        unknown = [v["e3d"] for v in r.per_texture.values() if v.get("known") is False]
        light = [v["e3d"] for v in r.per_illumination.values()]
        return {
            "e3d_mean": r.e3d_mean,
            "e3d_std": r.e3d_std,
            "mean_shape_e3d": mean_shape_e3d(self.dataset),
            "known_e3d": float(np.mean(known)) if known else None,
            "unknown_e3d": float(np.mean(unknown)) if unknown else None,
            "illumination_spread": (max(light) - min(light)) / min(light) if light else None,
            "occlusion_radius_curve": occlusion_by_radius(self.occlusion),
            "od_iou": float(self.od.test_iou.mean()) if self.od and self.od.test_iou.size else None,
            "timings": self.timings,
        }


def mean_shape_e3d(ds: Dataset) -> float:
    """Test e3D of always predicting the mean training surface, as a reference."""
    from .evaluator import e3d

    mean = ds.surfaces[ds.manifest.train].mean(axis=0)
    gt = ds.surfaces[ds.state_ids(ds.frame_indices("test"))]
    return e3d(np.broadcast_to(mean, gt.shape), gt)


def occlusion_by_radius(res: OcclusionResult) -> list[float]:
    """Mean e3D per radius, averaged over occluder counts."""
    return [float(np.mean(row)) for row in res.grid]


def nondecreasing_within(values, slack: float) -> bool:
    """Each value is at least (1 - slack) times the running maximum before it."""
    peak = -np.inf
    for v in values:
        if v < (1 - slack) * peak:
            return False
        peak = max(peak, v)
    return True


def run_desk(dataset_cfg: DatasetConfig | None = None, train_cfg: TrainConfig | None = None,
             occ_cfg: OcclusionConfig | None = None, mask_count: int = 1000, out_dir=None,
             odnet: ODNet | None = None, dataset: Dataset | None = None) -> DeskResult:
    """Generate, train OD-Net (unless given), train Rec-Net, evaluate, sweep occlusions."""
    dataset_cfg = dataset_cfg or DatasetConfig()
    train_cfg = train_cfg or TrainConfig()
    occ_cfg = occ_cfg or OcclusionConfig()
    out = Path(out_dir) if out_dir else None
    if out:
        write_snapshot(out, {"dataset": dataset_cfg.to_dict(), "train": config_dict(train_cfg),
                             "occlusion": config_dict(occ_cfg), "mask_count": mask_count})
    timings = {}
    t0 = time.perf_counter()
    ds = dataset or generate_dataset(dataset_cfg)
    timings["generate"] = time.perf_counter() - t0
    od = None
    if odnet is None and train_cfg.segment_inputs:
        od = run_od_stage(mask_set_from_dataset(ds, mask_count, seed=dataset_cfg.seed), train_cfg,
                          out / "od" if out else None)
        odnet = od.model
        timings["train_od"] = od.seconds
    t0 = time.perf_counter()
    rec = run_rec_stage(ds, train_cfg, odnet, out / "rec" if out else None)
    timings["train_rec"] = time.perf_counter() - t0
    t0 = time.perf_counter()
    seg = odnet if train_cfg.segment_inputs else None
    report = evaluate(rec.generator, ds, seg)
    fr = select_occlusion_frames(ds, occ_cfg.n_frames, seed=occ_cfg.seed)
    occ = occlusion_sweep(rec.generator, ds.images[fr], ds.surfaces[ds.state_ids(fr)],
                          ds.footprints[fr], occ_cfg, seg)
    report.occlusion = occ.to_dict()
    timings["evaluate"] = time.perf_counter() - t0
    result = DeskResult(ds, od, rec, report, occ, timings)
    if out:
        (out / "report.json").write_text(json.dumps(report.to_dict(), indent=1) + "\n")
        (out / "summary.json").write_text(json.dumps(result.summary(), indent=1) + "\n")
    return result
