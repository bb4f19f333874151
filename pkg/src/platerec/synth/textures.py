"""Procedural albedo textures and background images."""

from __future__ import annotations

import numpy as np
from scipy import ndimage

TEXTURE_NAMES = ("checker", "noise", "stripes", "gradient")
TEXTURELESS = -1
TEX_SIZE = 256


def _grid(n: int) -> tuple[np.ndarray, np.ndarray]:
    t = (np.arange(n) + 0.5) / n
    return np.meshgrid(t, t)


def make_texture(texture_id: int, size: int = TEX_SIZE, seed: int = 0) -> np.ndarray:
    """RGB float texture in [0, 1], indexed [v, u]."""
    u, v = _grid(size)
    rng = np.random.default_rng(1000 + seed * 31 + max(texture_id, 0))
    if texture_id == TEXTURELESS:
        return np.full((size, size, 3), 0.8)
    name = TEXTURE_NAMES[texture_id]
    if name == "checker":
        cells = ((np.floor(u * 8) + np.floor(v * 8)) % 2)[..., None]
        a, b = np.array([0.9, 0.85, 0.7]), np.array([0.25, 0.3, 0.45])
        return cells * a + (1 - cells) * b
    if name == "noise":
        raw = rng.random((size, size))
        blob = ndimage.gaussian_filter(raw, 4.0, mode="wrap")
        blob = (blob - blob.min()) / (np.ptp(blob) + 1e-12)
        fine = ndimage.gaussian_filter(rng.random((size, size)), 1.0, mode="wrap")
        fine = (fine - fine.min()) / (np.ptp(fine) + 1e-12)
        t = (0.7 * blob + 0.3 * fine)[..., None]
        return (1 - t) * np.array([0.55, 0.12, 0.1]) + t * np.array([0.95, 0.7, 0.6])
    if name == "stripes":
        phase = (u + v) * 12.0
        band = np.floor(phase) % 3
        pal = np.array([[0.15, 0.5, 0.2], [0.9, 0.8, 0.2], [0.2, 0.3, 0.8]])
        return pal[band.astype(int)]
    if name == "gradient":
        r = 0.2 + 0.7 * u
        g = 0.2 + 0.6 * (1 - v)
        b = 0.3 + 0.5 * np.abs(u - v)
        return np.stack([r, g, b], axis=-1)
    raise ValueError(f"unknown texture {texture_id}")


def sample_texture(tex: np.ndarray, uv: np.ndarray) -> np.ndarray:
    """Bilinear lookup; ``uv`` in [0, 1], shape (..., 2)."""
    n = tex.shape[0]
    x = np.clip(uv[..., 0] * n - 0.5, 0, n - 1)
    y = np.clip(uv[..., 1] * n - 0.5, 0, n - 1)
    x0, y0 = np.floor(x).astype(int), np.floor(y).astype(int)
    x1, y1 = np.minimum(x0 + 1, n - 1), np.minimum(y0 + 1, n - 1)
    fx, fy = (x - x0)[..., None], (y - y0)[..., None]
    top = tex[y0, x0] * (1 - fx) + tex[y0, x1] * fx
    bot = tex[y1, x0] * (1 - fx) + tex[y1, x1] * fx
    return top * (1 - fy) + bot * fy


BACKGROUND_KINDS = ("sky", "office", "forest")


def make_background(kind: str, size: int = 224, seed: int = 0) -> np.ndarray:
    """Stand-in scene backgrounds as uint8 RGB."""
    rng = np.random.default_rng(seed)
    u, v = _grid(size)
    if kind == "sky":
        base = (1 - v)[..., None] * np.array([0.35, 0.55, 0.95]) + v[..., None] * np.array([0.75, 0.85, 1.0])
        cloud = ndimage.gaussian_filter(rng.random((size, size)), 10, mode="wrap")
        cloud = np.clip((cloud - cloud.mean()) / (cloud.std() + 1e-12), 0, None)[..., None]
        img = base + 0.15 * cloud
    elif kind == "office":
        img = np.ones((size, size, 3)) * np.array([0.7, 0.66, 0.58])
        for _ in range(12):
            x0, y0 = rng.integers(0, size, 2)
            w, h = rng.integers(size // 10, size // 3, 2)
            img[y0:y0 + h, x0:x0 + w] = rng.uniform(0.1, 0.9, 3)
    elif kind == "forest":
        n = ndimage.gaussian_filter(rng.random((size, size)), 3, mode="wrap")
        n = (n - n.min()) / (np.ptp(n) + 1e-12)
        img = (1 - n)[..., None] * np.array([0.08, 0.25, 0.06]) + n[..., None] * np.array([0.45, 0.35, 0.15])
    else:
        raise ValueError(f"unknown background kind {kind!r}")
    return (np.clip(img, 0, 1) * 255).round().astype(np.uint8)
