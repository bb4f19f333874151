"""Rec-Net: residual encoder-decoder regressing a point grid from an image.

The encoder is a stack of {conv, batch norm, leaky ReLU, max pool} blocks.
The decoder upsamples with transposed convolutions and adds the encoder
activation of the same resolution wherever one exists. The last layer is a
linear 1x1 convolution so coordinates are unbounded. With ``template`` on,
its output is added to a learnable per-point grid initialised to the flat
rest plate, so the convolutional path only has to explain the deformation.
"""

from __future__ import annotations

from dataclasses import dataclass, field, asdict

import numpy as np
import torch
from torch import nn

from .errors import NumericError, ShapeError
from .synth.deform import SurfaceState, rest_grid

LEAK = 0.2


@dataclass(frozen=True)
class DecoderBlock:
    out_channels: int
    kernel: int
    stride: int
    padding: int = 0


@dataclass(frozen=True)
class RecNetConfig:
    variant: str = "full"
    in_size: int = 224
    enc_channels: tuple[int, ...] = (16, 32, 64, 128, 256)
    enc_pools: tuple[int, ...] = (2, 2, 2, 2, 2)
    enc_kernel: int = 3
    dec_blocks: tuple[DecoderBlock, ...] = field(default_factory=tuple)
    out_grid: int = 73
    template: bool = True

    def __post_init__(self):
        if len(self.enc_channels) != len(self.enc_pools):
            raise ValueError("enc_channels and enc_pools differ in length")
        if not self.dec_blocks:
            raise ValueError("decoder needs at least one block")

    @property
    def latent_size(self) -> int:
        s = self.in_size
        for p in self.enc_pools:
            s //= p
        return s

    @property
    def latent_shape(self) -> tuple[int, int, int]:
        s = self.latent_size
        return (s, s, self.enc_channels[-1])

    def decoder_sizes(self) -> list[int]:
        s, out = self.latent_size, []
        for b in self.dec_blocks:
            s = (s - 1) * b.stride - 2 * b.padding + b.kernel
            out.append(s)
        return out

    def to_dict(self) -> dict:
        return asdict(self)

    @classmethod
    def from_dict(cls, d: dict) -> "RecNetConfig":
        d = dict(d)
        d["enc_channels"] = tuple(d["enc_channels"])
        d["enc_pools"] = tuple(d["enc_pools"])
        d["dec_blocks"] = tuple(DecoderBlock(**b) for b in d["dec_blocks"])
        return cls(**d)


def full_config(width: int = 16) -> RecNetConfig:
    """Five encoder blocks, 224 -> 7x7 latent, decoder 7 -> 14 -> 28 -> 37 -> 73."""
    w = width
    return RecNetConfig(
        variant="full",
        enc_channels=(w, 2 * w, 4 * w, 8 * w, 16 * w),
        enc_pools=(2, 2, 2, 2, 2),
        dec_blocks=(
            DecoderBlock(8 * w, 2, 2),
            DecoderBlock(4 * w, 2, 2),
            DecoderBlock(2 * w, 10, 1),
            DecoderBlock(w, 3, 2, 1),
            DecoderBlock(w, 3, 1, 1),
        ),
        out_grid=73,
    )


def reduced_config(width: int = 16) -> RecNetConfig:
    """Two encoder and two decoder blocks fewer; 11x11x256 latent, 31x31 output."""
    w = width
    return RecNetConfig(
        variant="reduced",
        enc_channels=(w, 2 * w, 256),
        enc_pools=(2, 2, 5),
        dec_blocks=(
            DecoderBlock(4 * w, 3, 2, 1),
            DecoderBlock(2 * w, 11, 1),
            DecoderBlock(w, 3, 1, 1),
        ),
        out_grid=31,
    )


def make_config(variant: str = "full", width: int = 16) -> RecNetConfig:
    if variant == "full":
        return full_config(width)
    if variant == "reduced":
        return reduced_config(width)
    raise ValueError(f"unknown Rec-Net variant {variant!r}")


class RecNet(nn.Module):
    def __init__(self, config: RecNetConfig | None = None):
        super().__init__()
        self.config = config = config or full_config()
        sizes = config.decoder_sizes()
        if sizes[-1] != config.out_grid:
            raise ShapeError(
                f"decoder ends at {sizes[-1]}x{sizes[-1]}, expected {config.out_grid}"
            )
        k = config.enc_kernel
        self.encoder = nn.ModuleList()
        c_in, s = 3, config.in_size
        self.enc_sizes = []
        for c, p in zip(config.enc_channels, config.enc_pools):
            self.encoder.append(
                nn.Sequential(
                    nn.Conv2d(c_in, c, k, padding=k // 2, bias=False),
                    nn.BatchNorm2d(c),
                    nn.LeakyReLU(LEAK),
                    nn.MaxPool2d(p),
                )
            )
            c_in, s = c, s // p
            self.enc_sizes.append((s, c))
        self.decoder = nn.ModuleList()
        # decoder block i -> index of the encoder block whose output it receives
        self.skips: dict[int, int] = {}
        for i, (b, size) in enumerate(zip(config.dec_blocks, sizes)):
            self.decoder.append(
                nn.Sequential(
                    nn.ConvTranspose2d(c_in, b.out_channels, b.kernel, b.stride,
                                       b.padding, bias=False),
                    nn.BatchNorm2d(b.out_channels),
                    nn.LeakyReLU(LEAK),
                )
            )
            c_in = b.out_channels
            for j, (es, ec) in enumerate(self.enc_sizes[:-1]):
                if es == size and ec == c_in:
                    self.skips[i] = j
        self.head = nn.Conv2d(c_in, 3, 1)
        g = config.out_grid
        self.template = nn.Parameter(torch.zeros(3, g, g)) if config.template else None
        self.check_finite = False
        self.use_skips = True
        self.reset_parameters()

    def reset_parameters(self):
        for m in self.modules():
            if isinstance(m, (nn.Conv2d, nn.ConvTranspose2d)):
                nn.init.kaiming_normal_(m.weight, a=LEAK, nonlinearity="leaky_relu")
                if m.bias is not None:
                    nn.init.zeros_(m.bias)
        nn.init.normal_(self.head.weight, std=1e-2)
        if self.template is not None:
            rest = torch.from_numpy(rest_grid(self.config.out_grid)).permute(2, 0, 1)
            with torch.no_grad():
                self.template.copy_(rest)

    def _check(self, x, name):
        if self.check_finite and not torch.isfinite(x).all():
            raise NumericError(f"non-finite activation after {name}")

    def forward(self, x: torch.Tensor) -> torch.Tensor:
        """(B, 3, H, W) in [0, 1] -> (B, G, G, 3) point grids."""
        n = self.config.in_size
        if x.ndim != 4 or tuple(x.shape[1:]) != (3, n, n):
            raise ShapeError(f"expected (B, 3, {n}, {n}) input, got {tuple(x.shape)}")
        feats = []
        for i, block in enumerate(self.encoder):
            x = block(x)
            self._check(x, f"encoder[{i}]")
            feats.append(x)
        for i, block in enumerate(self.decoder):
            x = block(x)
            if self.use_skips and i in self.skips:
                x = x + feats[self.skips[i]]
            self._check(x, f"decoder[{i}]")
        x = self.head(x)
        if self.template is not None:
            x = x + self.template
        self._check(x, "head")
        return x.permute(0, 2, 3, 1)


def count_parameters(config: RecNetConfig) -> int:
    return sum(p.numel() for p in RecNet(config).parameters() if p.requires_grad)


def image_to_tensor(image: np.ndarray) -> torch.Tensor:
    """HxWx3 uint8 (or float in [0,1]) -> (1, 3, H, W) float tensor in [0,1]."""
    img = np.asarray(image)
    if img.ndim != 3 or img.shape[2] != 3:
        raise ShapeError(f"expected HxWx3 image, got shape {img.shape}")
    if img.dtype == np.uint8:
        img = img.astype(np.float32) / 255.0
    return torch.from_numpy(np.ascontiguousarray(img, dtype=np.float32)).permute(2, 0, 1)[None]


@torch.no_grad()
def reconstruct(model: RecNet, image: np.ndarray) -> SurfaceState:
    """Regress a single (G, G, 3) point grid from a segmented image."""
    was_training, was_checking = model.training, model.check_finite
    model.eval()
    model.check_finite = True
    try:
        out = model(image_to_tensor(image))
    finally:
        model.train(was_training)
        model.check_finite = was_checking
    return SurfaceState(out[0].double().numpy(), state_id=-1)
