"""Training objectives.

Reductions follow one convention throughout: absolute differences are
summed over every entry of a surface, then averaged over the batch.
"""

from __future__ import annotations

import math
import warnings
from dataclasses import dataclass, astuple

import torch
from torch.nn import functional as F

from .errors import NumericError, ShapeError

BCE_EPS = 1e-7


@dataclass(frozen=True)
class IsometryConfig:
    sigma: float = 1.0
    kernel_size: int = 5
    padding: str = "replicate"
    detach_target: bool = False

    def __post_init__(self):
        if self.kernel_size < 3 or self.kernel_size % 2 == 0:
            raise ValueError("kernel_size must be odd and >= 3")
        if self.sigma < 0:
            raise ValueError("sigma must be non-negative")


@dataclass
class LossBreakdown:
    l3d: float = 0.0
    liso: float = 0.0
    lg: float = 0.0
    ld: float = 0.0

    @property
    def total(self) -> float:
        return loss_total(self)

    def as_row(self) -> tuple[float, float, float, float, float]:
        return (self.l3d, self.liso, self.lg, self.ld, self.total)


def _check_pair(pred: torch.Tensor, gt: torch.Tensor) -> None:
    if pred.shape != gt.shape:
        raise ShapeError(f"prediction {tuple(pred.shape)} vs ground truth {tuple(gt.shape)}")
    if pred.ndim != 4 or pred.shape[-1] != 3:
        raise ShapeError(f"expected (B, H, W, 3) surfaces, got {tuple(pred.shape)}")


def loss_3d(pred: torch.Tensor, gt: torch.Tensor) -> torch.Tensor:
    """Mean over the batch of the per-surface sum of absolute differences."""
    _check_pair(pred, gt)
    return (pred - gt).abs().sum(dim=(1, 2, 3)).mean()


def loss_3d_squared(pred: torch.Tensor, gt: torch.Tensor) -> torch.Tensor:
    """Squared-error counterpart of :func:`loss_3d`, used only for warm-up."""
    _check_pair(pred, gt)
    return (pred - gt).square().sum(dim=(1, 2, 3)).mean()


def gaussian_kernel(sigma: float, size: int, dtype=torch.float64) -> torch.Tensor:
    """Normalized (size, size) Gaussian; sigma == 0 gives a delta."""
    r = size // 2
    ax = torch.arange(-r, r + 1, dtype=torch.float64)
    if sigma == 0:
        k1 = (ax == 0).to(torch.float64)
    else:
        k1 = torch.exp(-(ax ** 2) / (2.0 * sigma ** 2))
    k = torch.outer(k1, k1)
    return (k / k.sum()).to(dtype)


def smooth_surface(surface: torch.Tensor, cfg: IsometryConfig = IsometryConfig()) -> torch.Tensor:
    """Per-coordinate 2D Gaussian blur of (B, H, W, 3) or (H, W, 3) grids."""
    single = surface.ndim == 3
    x = surface[None] if single else surface
    if x.ndim != 4 or x.shape[-1] != 3:
        raise ShapeError(f"expected (B, H, W, 3) surfaces, got {tuple(surface.shape)}")
    k = gaussian_kernel(cfg.sigma, cfg.kernel_size, x.dtype).to(x.device)
    r = cfg.kernel_size // 2
    x = x.permute(0, 3, 1, 2)
    x = F.pad(x, (r, r, r, r), mode=cfg.padding)
    x = F.conv2d(x, k.expand(3, 1, -1, -1), groups=3)
    x = x.permute(0, 2, 3, 1)
    return x[0] if single else x


def loss_iso(pred: torch.Tensor, cfg: IsometryConfig = IsometryConfig()) -> torch.Tensor:
    """Batch mean of the summed absolute gap between surfaces and their blur."""
    smooth = smooth_surface(pred, cfg)
    if cfg.detach_target:
        smooth = smooth.detach()
    return (smooth - pred).abs().sum(dim=(1, 2, 3)).mean()


def _clamp_probs(p: torch.Tensor, name: str) -> torch.Tensor:
    if bool(((p <= 0) | (p >= 1)).any()):
        warnings.warn(f"{name} outside (0, 1); clamping to [{BCE_EPS}, 1 - {BCE_EPS}]", RuntimeWarning)
    return p.clamp(BCE_EPS, 1 - BCE_EPS)


def loss_adv_generator(d_on_fake: torch.Tensor) -> torch.Tensor:
    """-mean log D(G(I))."""
    return -torch.log(_clamp_probs(d_on_fake, "D(G(I))")).mean()


def loss_adv_discriminator(d_on_real: torch.Tensor, d_on_fake: torch.Tensor) -> torch.Tensor:
    """-mean [log D(S) + log(1 - D(G(I)))].

    Real and fake batches may differ in length; each term is averaged over
    its own batch.
    """
    real = _clamp_probs(d_on_real, "D(S)")
    fake = _clamp_probs(d_on_fake, "D(G(I))")
    return -(torch.log(real).mean() + torch.log1p(-fake).mean())


def loss_total(components: LossBreakdown, weights=(1.0, 1.0, 1.0, 1.0)) -> float:
    vals = astuple(components)
    if not all(math.isfinite(v) for v in vals):
        raise NumericError(f"non-finite loss component in {components}")
    return float(sum(w * v for w, v in zip(weights, vals)))
