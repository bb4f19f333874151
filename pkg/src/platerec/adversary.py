"""Discriminator over 73x73x3 point grids."""

from __future__ import annotations

from dataclasses import dataclass, asdict

import torch
from torch import nn

from .errors import ShapeError

LEAK = 0.2
# keeps outputs strictly inside (0, 1) in float32
PROB_EPS = 1e-7


@dataclass(frozen=True)
class ConvBlock:
    out_channels: int
    kernel: int
    stride: int
    padding: int
    batch_norm: bool = True


@dataclass(frozen=True)
class DiscriminatorConfig:
    grid: int = 73
    blocks: tuple[ConvBlock, ...] = (
        ConvBlock(16, 4, 2, 1, batch_norm=False),  # 73 -> 36
        ConvBlock(32, 4, 2, 1),  # 36 -> 18
        ConvBlock(64, 4, 2, 1),  # 18 -> 9
        ConvBlock(64, 3, 1, 0),  # 9 -> 7
    )

    def activation_shape(self) -> tuple[int, int, int]:
        s = self.grid
        for b in self.blocks:
            s = (s + 2 * b.padding - b.kernel) // b.stride + 1
        return (s, s, self.blocks[-1].out_channels)

    @property
    def head_width(self) -> int:
        h, w, c = self.activation_shape()
        return h * w * c

    def to_dict(self) -> dict:
        return asdict(self)

    @classmethod
    def from_dict(cls, d: dict) -> "DiscriminatorConfig":
        return cls(grid=d["grid"], blocks=tuple(ConvBlock(**b) for b in d["blocks"]))


class Discriminator(nn.Module):
    def __init__(self, config: DiscriminatorConfig | None = None):
        super().__init__()
        self.config = config = config or DiscriminatorConfig()
        layers: list[nn.Module] = []
        c_in = 3
        for b in config.blocks:
            layers.append(nn.Conv2d(c_in, b.out_channels, b.kernel, b.stride, b.padding))
            layers.append(nn.LeakyReLU(LEAK))
            if b.batch_norm:
                layers.append(nn.BatchNorm2d(b.out_channels))
            c_in = b.out_channels
        self.features = nn.Sequential(*layers)
        self.head = nn.Linear(config.head_width, 1)

    def activations(self, surfaces: torch.Tensor) -> torch.Tensor:
        """(B, G, G, 3) grids -> (B, C, h, w) pre-head activations."""
        g = self.config.grid
        if surfaces.ndim != 4 or tuple(surfaces.shape[1:]) != (g, g, 3):
            raise ShapeError(f"expected (B, {g}, {g}, 3) surfaces, got {tuple(surfaces.shape)}")
        return self.features(surfaces.permute(0, 3, 1, 2))

    def logits(self, surfaces: torch.Tensor) -> torch.Tensor:
        return self.head(self.activations(surfaces).flatten(1))[:, 0]

    def forward(self, surfaces: torch.Tensor) -> torch.Tensor:
        """Probability that each surface is ground truth, shape (B,)."""
        return torch.sigmoid(self.logits(surfaces)).clamp(PROB_EPS, 1 - PROB_EPS)


@torch.no_grad()
def discriminate(model: Discriminator, surface) -> float:
    was_training = model.training
    model.eval()
    try:
        x = torch.as_tensor(surface, dtype=next(model.parameters()).dtype)
        return float(model(x[None])[0])
    finally:
        model.train(was_training)
