"""Composited foreground/background samples for segmentation training."""

from __future__ import annotations

import json
from dataclasses import dataclass
from pathlib import Path

import numpy as np
from PIL import Image

from ..errors import ShapeError
from .render import RenderedFrame


@dataclass
class MaskSample:
    image: np.ndarray  # uint8 (H, W, 3)
    mask: np.ndarray  # uint8 (H, W) in {0, 1}

    def __post_init__(self):
        if self.mask.shape != self.image.shape[:2]:
            raise ShapeError(f"mask {self.mask.shape} vs image {self.image.shape}")


@dataclass
class MaskConfig:
    max_shift: float = 0.25  # fraction of image size
    min_visible: float = 0.5
    max_tries: int = 50


def shift(arr: np.ndarray, dx: int, dy: int) -> np.ndarray:
    """Translate by (dx, dy) pixels (x right, y down), zero fill, crop at borders."""
    out = np.zeros_like(arr)
    h, w = arr.shape[:2]
    if abs(dx) >= w or abs(dy) >= h:
        return out
    src_y = slice(max(0, -dy), h - max(0, dy))
    src_x = slice(max(0, -dx), w - max(0, dx))
    dst_y = slice(max(0, dy), h - max(0, -dy))
    dst_x = slice(max(0, dx), w - max(0, -dx))
    out[dst_y, dst_x] = arr[src_y, src_x]
    return out


def composite(frame: RenderedFrame, background: np.ndarray, dx: int = 0, dy: int = 0) -> MaskSample:
    if frame.footprint is None:
        raise ValueError("frame has no footprint")
    if background.shape != frame.image.shape:
        raise ShapeError(f"background {background.shape} vs frame {frame.image.shape}")
    fg = shift(frame.footprint, dx, dy)
    img = np.where(fg[..., None], shift(frame.image, dx, dy), background)
    return MaskSample(img.astype(np.uint8), fg.astype(np.uint8))


def build_mask_dataset(frames, backgrounds, count: int, cfg: MaskConfig | None = None,
                       seed: int = 0) -> list[MaskSample]:
    """Random frame over a random background with a random translation.

    Translations are redrawn until at least ``min_visible`` of the object
    stays in frame.
    """
    cfg = cfg or MaskConfig()
    frames, backgrounds = list(frames), list(backgrounds)
    if not frames or not backgrounds:
        raise ValueError("frames and backgrounds must be non-empty")
    if count < 1:
        raise ValueError("count must be >= 1")
    rng = np.random.default_rng(seed)
    out = []
    for _ in range(count):
        f = frames[int(rng.integers(len(frames)))]
        bg = backgrounds[int(rng.integers(len(backgrounds)))]
        total = int(f.footprint.sum())
        h, w = f.footprint.shape
        lim = int(cfg.max_shift * min(h, w))
        for _ in range(cfg.max_tries):
            dx, dy = (int(v) for v in rng.integers(-lim, lim + 1, 2))
            if shift(f.footprint, dx, dy).sum() >= cfg.min_visible * total:
                break
        else:
            dx = dy = 0
        out.append(composite(f, bg, dx, dy))
    return out


def split_masks(samples: list, ratio: float = 0.8) -> tuple[list, list]:
    """4:1 train/test split in order (samples are already shuffled)."""
    k = int(round(len(samples) * ratio))
    return samples[:k], samples[k:]


def save_mask_set(samples: list[MaskSample], root, ratio: float = 0.8, meta: dict | None = None) -> Path:
    """PNG pairs under images/ and masks/ plus an index with the train/test split."""
    root = Path(root)
    (root / "images").mkdir(parents=True, exist_ok=True)
    (root / "masks").mkdir(parents=True, exist_ok=True)
    names = []
    for i, s in enumerate(samples):
        name = f"sample_{i:05d}.png"
        Image.fromarray(s.image).save(root / "images" / name)
        Image.fromarray(s.mask * 255).save(root / "masks" / name)
        names.append(name)
    k = int(round(len(samples) * ratio))
    index = {"train": names[:k], "test": names[k:], "meta": meta or {}}
    (root / "index.json").write_text(json.dumps(index, indent=1, sort_keys=True) + "\n")
    return root


def load_mask_set(root) -> tuple[list[MaskSample], list[MaskSample]]:
    root = Path(root)
    ipath = root / "index.json"
    if not ipath.exists():
        raise FileNotFoundError(f"no mask index at {ipath}")
    index = json.loads(ipath.read_text())
    missing = [str(root / d / n) for n in index["train"] + index["test"]
               for d in ("images", "masks") if not (root / d / n).exists()]
    if missing:
        raise FileNotFoundError("missing mask files: " + ", ".join(missing[:10]))

    def read(names):
        return [MaskSample(np.asarray(Image.open(root / "images" / n).convert("RGB")),
                           (np.asarray(Image.open(root / "masks" / n)) > 0).astype(np.uint8))
                for n in names]

    return read(index["train"]), read(index["test"])


def stack(samples: list[MaskSample]) -> tuple[np.ndarray, np.ndarray]:
    return np.stack([s.image for s in samples]), np.stack([s.mask for s in samples])
