"""Reconstruction error, per-factor reports, occlusion sweeps and timing."""

from __future__ import annotations

import time
from dataclasses import dataclass, field, asdict

import cv2
import numpy as np
import torch

from .errors import MetricError, ShapeError
from .reconstructor import RecNet
from .segmenter import ODNet, binarize, extract_object_mask, apply_mask, segment_batch


def e3d_per_frame(pred: np.ndarray, gt: np.ndarray) -> np.ndarray:
    """||gt - pred||_F / ||gt||_F for each surface in the batch."""
    pred, gt = np.asarray(pred, dtype=np.float64), np.asarray(gt, dtype=np.float64)
    if pred.shape != gt.shape:
        raise ShapeError(f"prediction {pred.shape} vs ground truth {gt.shape}")
    if gt.ndim == 3:
        pred, gt = pred[None], gt[None]
    flat_gt = gt.reshape(len(gt), -1)
    den = np.linalg.norm(flat_gt, axis=1)
    zero = np.nonzero(den == 0)[0]
    if zero.size:
        raise MetricError(f"ground-truth surface {int(zero[0])} has zero Frobenius norm")
    num = np.linalg.norm(flat_gt - pred.reshape(len(pred), -1), axis=1)
    return num / den


def e3d(pred: np.ndarray, gt: np.ndarray) -> float:
    return float(e3d_per_frame(pred, gt).mean())


@torch.no_grad()
def predict(model: RecNet, images: np.ndarray, batch_size: int = 16) -> np.ndarray:
    model.eval()
    out = []
    for i in range(0, len(images), batch_size):
        x = torch.from_numpy(np.ascontiguousarray(images[i:i + batch_size])).permute(0, 3, 1, 2)
        x = x.float().div_(255.0).contiguous(memory_format=torch.channels_last)
        out.append(model(x).double().numpy())
    return np.concatenate(out) if out else np.zeros((0, model.config.out_grid, model.config.out_grid, 3))


def prepare_inputs(images: np.ndarray, odnet: ODNet | None) -> tuple[np.ndarray, np.ndarray]:
    """Segment frames when an OD-Net is given; returns (inputs, fallback flags)."""
    if odnet is None:
        return images, np.zeros(len(images), dtype=bool)
    return segment_batch(odnet, images)


@dataclass
class EvalReport:
    e3d_mean: float
    e3d_std: float
    count: int
    sad_mean: float
    per_texture: dict = field(default_factory=dict)
    per_illumination: dict = field(default_factory=dict)
    per_camera: dict = field(default_factory=dict)
    fallback_count: int = 0
    timing: dict | None = None
    occlusion: dict | None = None
    frame_index: list = field(default_factory=list)
    frame_e3d: list = field(default_factory=list)

    def to_dict(self) -> dict:
        return asdict(self)


def _breakdown(errors: np.ndarray, keys: np.ndarray, extra=None) -> dict:
    out = {}
    for k in sorted(set(keys.tolist())):
        sel = errors[keys == k]
        row = {"e3d": float(sel.mean()), "std": float(sel.std()), "count": int(sel.size)}
        if extra:
            row.update(extra(k))
        out[str(k)] = row
    return out


def report_from_predictions(pred: np.ndarray, gt: np.ndarray, records, known_textures=None,
                            fallback: np.ndarray | None = None) -> EvalReport:
    """``records`` carry texture_id / illumination_id / camera_id per frame."""
    if len(pred) == 0:
        raise ValueError("empty test split")
    err = e3d_per_frame(pred, gt)
    sad = np.abs(pred - gt).reshape(len(pred), -1).sum(axis=1)
    tex = np.array([r.texture_id for r in records])
    light = np.array([r.illumination_id for r in records])
    cam = np.array([r.camera_id for r in records])
    known = None if known_textures is None else set(known_textures)
    return EvalReport(
        e3d_mean=float(err.mean()),
        e3d_std=float(err.std()),
        count=int(err.size),
        sad_mean=float(sad.mean()),
        per_texture=_breakdown(err, tex, None if known is None else (lambda k: {"known": k in known})),
        per_illumination=_breakdown(err, light),
        per_camera=_breakdown(err, cam),
        fallback_count=int(0 if fallback is None else np.sum(fallback)),
        frame_index=[int(r.index) for r in records],
        frame_e3d=err.tolist(),
    )


def evaluate(model: RecNet, dataset, odnet: ODNet | None = None, split: str = "test",
             batch_size: int = 16) -> EvalReport:
    idx = dataset.frame_indices(split)
    if idx.size == 0:
        raise ValueError(f"{split} split is empty")
    inputs, flags = prepare_inputs(dataset.images[idx], odnet)
    pred = predict(model, inputs, batch_size)
    gt = dataset.surfaces[dataset.state_ids(idx)]
    records = [dataset.manifest.frames[i] for i in idx]
    known = [t["id"] for t in dataset.manifest.textures if t["known"]]
    return report_from_predictions(pred, gt, records, known, flags)


# ------------------------------------------------------------- occlusion


@dataclass
class OcclusionConfig:
    radii: tuple[int, ...] = (3, 5, 7, 9, 11)
    counts: tuple[int, ...] = (1, 2, 3, 4, 5)
    images_per_cell: int = 10
    color: tuple[int, int, int] = (128, 128, 128)
    n_frames: int = 4
    seed: int = 0

    def __post_init__(self):
        if not self.radii or not self.counts:
            raise ValueError("radii and counts must be non-empty")
        if self.images_per_cell < 1:
            raise ValueError("images_per_cell must be >= 1")


def bounding_box(footprint: np.ndarray) -> tuple[int, int, int, int]:
    ys, xs = np.nonzero(footprint)
    if ys.size == 0:
        raise ValueError("empty footprint")
    return int(xs.min()), int(ys.min()), int(xs.max()), int(ys.max())


def occlude(image: np.ndarray, bbox, radius: int, count: int, rng: np.random.Generator,
            color=(128, 128, 128)) -> np.ndarray:
    """Draw ``count`` filled circles centred uniformly inside ``bbox``."""
    h, w = image.shape[:2]
    if radius > max(h, w):
        raise ValueError(f"occluder radius {radius} exceeds image size {w}x{h}")
    out = image.copy()
    if radius <= 0 or count <= 0:
        return out
    x0, y0, x1, y1 = bbox
    for _ in range(count):
        cx, cy = int(rng.integers(x0, x1 + 1)), int(rng.integers(y0, y1 + 1))
        cv2.circle(out, (cx, cy), int(radius), tuple(int(c) for c in color), thickness=-1)
    return out


def select_occlusion_frames(dataset, n: int, seed: int = 0) -> np.ndarray:
    """Seeded pick of known-texture test frames among the top-decile deformed states."""
    test = np.array(dataset.manifest.test)
    from .synth.deform import rest_grid

    rest = rest_grid(dataset.surfaces.shape[1])
    mag = np.linalg.norm((dataset.surfaces[test] - rest).reshape(len(test), -1), axis=1)
    k = max(1, int(np.ceil(0.1 * len(test))))
    top = set(test[np.argsort(-mag, kind="stable")[:k]].tolist())
    known = {t["id"] for t in dataset.manifest.textures if t["known"]}
    cand = np.array([f.index for f in dataset.manifest.frames
                     if f.state_id in top and f.texture_id in known], dtype=np.int64)
    rng = np.random.default_rng(seed)
    return np.sort(rng.choice(cand, size=min(n, cand.size), replace=False))


@dataclass
class OcclusionResult:
    radii: list
    counts: list
    grid: list  # grid[i][j]: mean e3d at radii[i], counts[j]
    baseline: float

    def to_dict(self) -> dict:
        return asdict(self)


def occlusion_sweep(model: RecNet, images: np.ndarray, gts: np.ndarray, footprints: np.ndarray,
                    cfg: OcclusionConfig | None = None, odnet: ODNet | None = None) -> OcclusionResult:
    cfg = cfg or OcclusionConfig()
    size = max(images.shape[1:3])
    if max(cfg.radii) > size:
        raise ValueError(f"occluder radius {max(cfg.radii)} exceeds image size {size}")
    boxes = [bounding_box(f) for f in footprints]
    base_in, _ = prepare_inputs(images, odnet)
    baseline = e3d_per_frame(predict(model, base_in), gts)
    rng = np.random.default_rng(cfg.seed)
    grid = []
    for r in cfg.radii:
        row = []
        for c in cfg.counts:
            if r <= 0 or c <= 0:
                row.append(float(baseline.mean()))
                continue
            occluded, targets = [], []
            for img, box, gt in zip(images, boxes, gts):
                for _ in range(cfg.images_per_cell):
                    occluded.append(occlude(img, box, r, c, rng, cfg.color))
                    targets.append(gt)
            inp, _ = prepare_inputs(np.stack(occluded), odnet)
            row.append(float(e3d_per_frame(predict(model, inp), np.stack(targets)).mean()))
        grid.append(row)
    return OcclusionResult(list(cfg.radii), list(cfg.counts), grid, float(baseline.mean()))


# ------------------------------------------------------------ throughput


def _stats(samples: list[float]) -> dict:
    a = np.asarray(samples)
    return {
        "samples": a.tolist(),
        "mean": float(a.mean()),
        "min": float(a.min()),
        "max": float(a.max()),
        "p50": float(np.percentile(a, 50)),
        "p99": float(np.percentile(a, 99)),
        "fps": float(1.0 / a.mean()),
    }


@torch.no_grad()
def measure_throughput(model: RecNet, frames: np.ndarray, odnet: ODNet | None = None,
                       warmup: int = 3, iters: int = 10, method: str | None = None) -> dict:
    """Single-stream per-frame latency of reconstruct alone and of the full pipeline."""
    if iters < 10 or warmup < 3:
        raise ValueError("need iters >= 10 and warmup >= 3")
    model.eval()
    if odnet is not None:
        odnet.eval()
        method = method or odnet.config.threshold

    def as_tensor(img):
        x = torch.from_numpy(np.ascontiguousarray(img)).permute(2, 0, 1)[None].float().div_(255.0)
        return x.contiguous(memory_format=torch.channels_last)

    def rec_only(img):
        return model(as_tensor(img))

    def full(img):
        if odnet is not None:
            conf = odnet(as_tensor(img))[0].double().numpy()
            img, _ = apply_mask(img, extract_object_mask(binarize(conf, method)))
        return model(as_tensor(img))

    out = {}
    for name, fn in (("reconstruct", rec_only), ("full", full)):
        for i in range(warmup):
            fn(frames[i % len(frames)])
        samples = []
        for i in range(iters):
            img = frames[i % len(frames)]
            t0 = time.perf_counter()
            fn(img)
            samples.append(time.perf_counter() - t0)
        out[name] = _stats(samples)
    return out
