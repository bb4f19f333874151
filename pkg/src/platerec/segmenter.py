"""OD-Net foreground segmentation and mask post-processing.

``predict_confidence`` runs the U-Net; ``binarize`` thresholds the map
(Otsu or fixed); ``extract_object_mask`` keeps the largest outer contour and
fills it; ``apply_mask`` blacks out the background.
"""

from __future__ import annotations

import logging
import warnings
from dataclasses import dataclass, asdict

import cv2
import numpy as np
import torch
from torch import nn
from torch.nn import functional as F

from .errors import ShapeError
from .reconstructor import image_to_tensor

log = logging.getLogger(__name__)


@dataclass(frozen=True)
class SegmenterConfig:
    depth: int = 3
    base_channels: int = 8
    threshold: str = "otsu"
    in_size: int = 224

    def __post_init__(self):
        if self.depth < 1:
            raise ValueError("depth must be >= 1")
        parse_method(self.threshold)

    def to_dict(self) -> dict:
        return asdict(self)

    @classmethod
    def from_dict(cls, d: dict) -> "SegmenterConfig":
        return cls(**d)


def _double_conv(c_in: int, c_out: int) -> nn.Sequential:
    return nn.Sequential(
        nn.Conv2d(c_in, c_out, 3, padding=1, bias=False),
        nn.BatchNorm2d(c_out),
        nn.ReLU(inplace=True),
        nn.Conv2d(c_out, c_out, 3, padding=1, bias=False),
        nn.BatchNorm2d(c_out),
        nn.ReLU(inplace=True),
    )


class ODNet(nn.Module):
    """U-Net with ``depth`` down/up blocks and a sigmoid confidence output."""

    def __init__(self, config: SegmenterConfig | None = None):
        super().__init__()
        self.config = config = config or SegmenterConfig()
        widths = [config.base_channels * 2**i for i in range(config.depth + 1)]
        self.inc = _double_conv(3, widths[0])
        self.down = nn.ModuleList(
            _double_conv(widths[i], widths[i + 1]) for i in range(config.depth)
        )
        self.up = nn.ModuleList(
            _double_conv(widths[i + 1] + widths[i], widths[i])
            for i in reversed(range(config.depth))
        )
        self.out = nn.Conv2d(widths[0], 1, 1)

    def forward(self, x: torch.Tensor) -> torch.Tensor:
        """(B, 3, H, W) -> (B, H, W) confidences in [0, 1]."""
        n = self.config.in_size
        if x.ndim != 4 or tuple(x.shape[1:]) != (3, n, n):
            raise ShapeError(f"expected (B, 3, {n}, {n}) input, got {tuple(x.shape)}")
        x = self.inc(x)
        skips = [x]
        for block in self.down:
            x = block(F.max_pool2d(x, 2))
            skips.append(x)
        skips.pop()
        for block in self.up:
            skip = skips.pop()
            x = F.interpolate(x, scale_factor=2, mode="bilinear", align_corners=False)
            dy, dx = skip.shape[2] - x.shape[2], skip.shape[3] - x.shape[3]
            if dy or dx:
                x = F.pad(x, [dx // 2, dx - dx // 2, dy // 2, dy - dy // 2])
            x = block(torch.cat([skip, x], dim=1))
        return torch.sigmoid(self.out(x))[:, 0]


@torch.no_grad()
def predict_confidence(model: ODNet, image: np.ndarray) -> np.ndarray:
    n = model.config.in_size
    if np.ndim(image) != 3 or np.shape(image) != (n, n, 3):
        raise ShapeError(f"expected {n}x{n}x3 image, got shape {np.shape(image)}")
    was_training = model.training
    model.eval()
    try:
        return model(image_to_tensor(image))[0].double().numpy()
    finally:
        model.train(was_training)


def parse_method(method: str) -> tuple[str, float | None]:
    if method == "otsu":
        return "otsu", None
    if method.startswith("fixed:"):
        t = float(method.split(":", 1)[1])
        if not 0.0 <= t <= 1.0:
            raise ValueError(f"fixed threshold {t} outside [0, 1]")
        return "fixed", t
    raise ValueError(f"unknown threshold method {method!r}")


def otsu_threshold(values: np.ndarray, bins: int = 256) -> float | None:
    """Threshold in [0, 1] maximizing between-class variance.

    Values are quantized into ``bins`` levels; pixels at level <= k form the
    background class for candidate k. Returns ``None`` when every candidate
    leaves one class empty (a constant map).
    """
    levels = np.clip(np.round(np.asarray(values, dtype=np.float64) * (bins - 1)), 0, bins - 1)
    hist = np.bincount(levels.astype(np.int64).ravel(), minlength=bins).astype(np.float64)
    p = hist / hist.sum()
    omega = np.cumsum(p)
    mu = np.cumsum(p * np.arange(bins))
    mu_t = mu[-1]
    denom = omega * (1.0 - omega)
    valid = denom > 1e-12
    if not valid.any():
        return None
    sigma_b = np.zeros(bins)
    sigma_b[valid] = (mu_t * omega[valid] - mu[valid]) ** 2 / denom[valid]
    k = int(np.argmax(sigma_b))
    # foreground is strictly above level k
    return (k + 0.5) / (bins - 1)


def binarize(conf: np.ndarray, method: str = "otsu") -> np.ndarray:
    conf = np.asarray(conf, dtype=np.float64)
    kind, t = parse_method(method)
    if kind == "otsu":
        t = otsu_threshold(conf)
        if t is None:
            warnings.warn("constant confidence map, falling back to fixed:0.5", RuntimeWarning)
            t = 0.5
            return (conf >= t).astype(np.uint8)
        return (conf > t).astype(np.uint8)
    return (conf >= t).astype(np.uint8)


def extract_object_mask(binary: np.ndarray) -> np.ndarray | None:
    """Fill the largest outer contour of ``binary``; ``None`` if it is empty.

    Contours come from OpenCV's border following. Ties on filled area go to
    the contour whose start point is topmost, then leftmost.
    """
    b = np.ascontiguousarray(np.asarray(binary) > 0, dtype=np.uint8)
    if not b.any():
        return None
    contours, _ = cv2.findContours(b, cv2.RETR_EXTERNAL, cv2.CHAIN_APPROX_NONE)
    best, best_key = None, None
    for c in contours:
        filled = np.zeros_like(b)
        cv2.drawContours(filled, [c], -1, 1, thickness=cv2.FILLED)
        x0, y0 = c[0, 0]
        key = (-int(filled.sum()), int(y0), int(x0))
        if best_key is None or key < best_key:
            best, best_key = filled, key
    return best


def apply_mask(image: np.ndarray, mask: np.ndarray | None) -> tuple[np.ndarray, bool]:
    """Black out background pixels. Returns (image, fallback_used).

    A ``None`` or all-zero mask passes the image through unchanged and
    flags the fallback.
    """
    image = np.asarray(image)
    if mask is None or not np.any(mask):
        return image.copy(), True
    mask = np.asarray(mask)
    if mask.shape != image.shape[:2]:
        raise ShapeError(f"mask {mask.shape} does not match image {image.shape[:2]}")
    return np.where(mask[..., None] > 0, image, 0).astype(image.dtype), False


@dataclass
class Segmentation:
    confidence: np.ndarray
    mask: np.ndarray | None
    segmented: np.ndarray
    fallback: bool


def segment(model: ODNet, image: np.ndarray, method: str | None = None) -> Segmentation:
    conf = predict_confidence(model, image)
    mask = extract_object_mask(binarize(conf, method or model.config.threshold))
    seg, fallback = apply_mask(image, mask)
    if fallback:
        log.warning("segmentation produced an empty mask; passing the raw image through")
    return Segmentation(conf, mask, seg, fallback)


@torch.no_grad()
def segment_batch(model: ODNet, images: np.ndarray, batch_size: int = 16,
                  method: str | None = None) -> tuple[np.ndarray, np.ndarray]:
    """Segment a stack of uint8 images. Returns (segmented, fallback flags)."""
    method = method or model.config.threshold
    was_training = model.training
    model.eval()
    out = np.empty_like(images)
    flags = np.zeros(len(images), dtype=bool)
    try:
        for i in range(0, len(images), batch_size):
            chunk = images[i:i + batch_size]
            x = torch.from_numpy(chunk.astype(np.float32) / 255.0).permute(0, 3, 1, 2)
            conf = model(x).double().numpy()
            for j, c in enumerate(conf):
                mask = extract_object_mask(binarize(c, method))
                out[i + j], flags[i + j] = apply_mask(chunk[j], mask)
    finally:
        model.train(was_training)
    return out, flags
