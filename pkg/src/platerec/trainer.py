"""Optimization loops for OD-Net and for the Rec-Net/discriminator pair."""

from __future__ import annotations

import copy
import csv
import logging
import math
from dataclasses import dataclass, field, asdict
from pathlib import Path

import numpy as np
import torch
from torch.nn import functional as F

from .adversary import Discriminator, DiscriminatorConfig
from .checkpoint import save_checkpoint
from .errors import NumericError
from .losses import (
    IsometryConfig,
    LossBreakdown,
    loss_3d,
    loss_3d_squared,
    loss_adv_discriminator,
    loss_adv_generator,
    loss_iso,
)
from .reconstructor import RecNet, make_config
from .segmenter import ODNet, SegmenterConfig

log = logging.getLogger(__name__)

HISTORY_FIELDS = ("epoch", "l3d", "liso", "lg", "ld", "total")


@dataclass
class TrainConfig:
    learning_rate: float = 1e-3
    batch_size: int = 8
    epochs_rec: int = 20
    epochs_od: int = 30
    # leading Rec-Net epochs that fit squared point error alone
    warmup_epochs: int = 2
    seed: int = 0
    betas: tuple[float, float] = (0.9, 0.999)
    gan_schedule: tuple[int, int] = (1, 1)  # generator steps : discriminator steps
    w_3d: float = 1.0
    w_iso: float = 1.0
    w_adv: float = 1.0
    iso_sigma: float = 1.0
    iso_kernel: int = 5
    iso_detach: bool = False
    rec_variant: str = "full"
    rec_width: int = 16
    od_base: int = 8
    od_depth: int = 3
    checkpoint_every: int = 0
    segment_inputs: bool = True

    def __post_init__(self):
        self.betas = tuple(self.betas)
        self.gan_schedule = tuple(self.gan_schedule)
        if self.learning_rate < 0 or self.batch_size < 1:
            raise ValueError("learning_rate must be >= 0 and batch_size >= 1")
        if self.epochs_rec < 1 or self.epochs_od < 1:
            raise ValueError("epoch counts must be >= 1")
        if self.warmup_epochs < 0:
            raise ValueError("warmup_epochs must be >= 0")
        if min(self.gan_schedule) < 1:
            raise ValueError("gan_schedule entries must be >= 1")

    @property
    def iso(self) -> IsometryConfig:
        return IsometryConfig(self.iso_sigma, self.iso_kernel, "replicate", self.iso_detach)

    def to_dict(self) -> dict:
        return asdict(self)


class TrainingAborted(NumericError):
    def __init__(self, msg: str, last_good: dict | None = None):
        super().__init__(msg)
        self.last_good = last_good


def _to_input(images: np.ndarray) -> torch.Tensor:
    x = torch.from_numpy(np.ascontiguousarray(images)).permute(0, 3, 1, 2).float().div_(255.0)
    return x.contiguous(memory_format=torch.channels_last)


def _batches(n: int, batch_size: int, rng: np.random.Generator):
    order = rng.permutation(n)
    for i in range(0, n, batch_size):
        # sorted so a batch's float32 reductions do not depend on the shuffle
        yield np.sort(order[i:i + batch_size])


def _seed(seed: int) -> np.random.Generator:
    torch.manual_seed(seed)
    return np.random.default_rng(seed)


# ---------------------------------------------------------------- OD-Net


@torch.no_grad()
def mask_iou(model: ODNet, images: np.ndarray, masks: np.ndarray, method: str | None = None,
             batch_size: int = 16) -> np.ndarray:
    """Per-image IoU of the post-processed (binarized + filled) mask."""
    from .segmenter import binarize, extract_object_mask

    method = method or model.config.threshold
    model.eval()
    out = []
    for i in range(0, len(images), batch_size):
        conf = model(_to_input(images[i:i + batch_size])).double().numpy()
        for c, gt in zip(conf, masks[i:i + batch_size]):
            m = extract_object_mask(binarize(c, method))
            m = np.zeros_like(gt, dtype=bool) if m is None else m.astype(bool)
            gt = gt.astype(bool)
            union = (m | gt).sum()
            out.append(1.0 if union == 0 else (m & gt).sum() / union)
    return np.array(out)


def train_odnet(images: np.ndarray, masks: np.ndarray, cfg: TrainConfig | None = None,
                model: ODNet | None = None, out_dir=None) -> tuple[ODNet, list[dict]]:
    """Supervised MSE between confidence map and binary mask.

    ``images`` is (N, H, W, 3) uint8, ``masks`` (N, H, W) in {0, 1}.
    """
    cfg = cfg or TrainConfig()
    if len(images) == 0:
        raise ValueError("empty OD-Net training set")
    rng = _seed(cfg.seed)
    model = model or ODNet(SegmenterConfig(depth=cfg.od_depth, base_channels=cfg.od_base))
    model = model.to(memory_format=torch.channels_last)
    opt = torch.optim.Adam(model.parameters(), lr=cfg.learning_rate, betas=cfg.betas)
    target = torch.from_numpy(np.asarray(masks, dtype=np.float32))
    history = []
    for epoch in range(1, cfg.epochs_od + 1):
        model.train()
        last_good = copy.deepcopy(model.state_dict())
        total, count = 0.0, 0
        for b, idx in enumerate(_batches(len(images), cfg.batch_size, rng)):
            pred = model(_to_input(images[idx]))
            loss = F.mse_loss(pred, target[idx])
            if not torch.isfinite(loss):
                model.load_state_dict(last_good)
                if out_dir:
                    save_checkpoint(Path(out_dir) / "odnet_last_good.pt", odnet=model)
                raise TrainingAborted(f"OD-Net MSE non-finite at epoch {epoch}, batch {b}", last_good)
            opt.zero_grad(set_to_none=True)
            loss.backward()
            opt.step()
            total += loss.item() * len(idx)
            count += len(idx)
        history.append({"epoch": epoch, "mse": total / count})
        log.info("od epoch %d mse %.5f", epoch, total / count)
        if out_dir and cfg.checkpoint_every and epoch % cfg.checkpoint_every == 0:
            save_checkpoint(Path(out_dir) / f"odnet_e{epoch:03d}.pt", odnet=model)
    model.eval()
    return model, history


# ---------------------------------------------------------- adversarial


def _set_requires_grad(model: torch.nn.Module, flag: bool) -> None:
    for p in model.parameters():
        p.requires_grad_(flag)


@dataclass
class AdversarialResult:
    generator: RecNet
    discriminator: Discriminator
    history: list[LossBreakdown] = field(default_factory=list)
    steps: list[LossBreakdown] = field(default_factory=list)


def train_adversarial(images: np.ndarray, surfaces: np.ndarray, cfg: TrainConfig | None = None,
                      generator: RecNet | None = None, discriminator: Discriminator | None = None,
                      out_dir=None, record_steps: bool = False) -> AdversarialResult:
    """Alternate generator and discriminator updates.

    ``images`` (K, 224, 224, 3) uint8 and ``surfaces`` (K, G, G, 3) are
    paired per frame. The generator step minimizes
    w_3d*L_3D + w_iso*L_iso + w_adv*L_G with D frozen; the discriminator
    step minimizes L_D with G frozen. With w_adv == 0 the discriminator is
    evaluated for logging only and never updated.
    """
    cfg = cfg or TrainConfig()
    if len(images) == 0:
        raise ValueError("empty Rec-Net training set")
    if len(images) != len(surfaces):
        raise ValueError(f"{len(images)} images vs {len(surfaces)} surfaces")
    rng = _seed(cfg.seed)
    G = generator or RecNet(make_config(cfg.rec_variant, cfg.rec_width))
    D = discriminator or Discriminator(DiscriminatorConfig(grid=G.config.out_grid)
                                       if G.config.out_grid != 73 else None)
    G = G.to(memory_format=torch.channels_last)
    opt_g = torch.optim.Adam(G.parameters(), lr=cfg.learning_rate, betas=cfg.betas)
    opt_d = torch.optim.Adam(D.parameters(), lr=cfg.learning_rate, betas=cfg.betas)
    gt_all = torch.from_numpy(np.asarray(surfaces, dtype=np.float32))
    iso = cfg.iso
    g_steps, d_steps = cfg.gan_schedule
    result = AdversarialResult(G, D)

    for epoch in range(1, cfg.epochs_rec + 1):
        G.train()
        D.train()
        last_good = {"recnet": copy.deepcopy(G.state_dict()),
                     "discriminator": copy.deepcopy(D.state_dict())}
        sums = np.zeros(4)
        count = 0
        for b, idx in enumerate(_batches(len(images), cfg.batch_size, rng)):
            x = _to_input(images[idx])
            gt = gt_all[idx]
            # generator update(s), discriminator frozen
            _set_requires_grad(D, False)
            for _ in range(g_steps):
                pred = G(x)
                l3d = loss_3d(pred, gt)
                liso = loss_iso(pred, iso)
                lg = loss_adv_generator(D(pred))
                if epoch <= cfg.warmup_epochs:
                    # L1-type terms pin the output at the median shape early on
                    loss = cfg.w_3d * loss_3d_squared(pred, gt)
                else:
                    loss = cfg.w_3d * l3d + cfg.w_iso * liso
                    if cfg.w_adv:
                        loss = loss + cfg.w_adv * lg
                terms = {"l3d": l3d, "liso": liso, "lg": lg}
                bad = [k for k, v in terms.items() if not torch.isfinite(v)]
                if bad:
                    raise _abort(out_dir, last_good, epoch, b, bad, G, D)
                opt_g.zero_grad(set_to_none=True)
                loss.backward()
                opt_g.step()
                opt_g.zero_grad(set_to_none=True)
            fake = pred.detach()
            _set_requires_grad(D, True)
            # discriminator update(s), generator frozen
            for k in range(d_steps):
                if k > 0:
                    with torch.no_grad():
                        fake = G(x)
                ld = loss_adv_discriminator(D(gt), D(fake))
                if not torch.isfinite(ld):
                    raise _abort(out_dir, last_good, epoch, b, ["ld"], G, D)
                if cfg.w_adv:
                    opt_d.zero_grad(set_to_none=True)
                    ld.backward()
                    opt_d.step()
                    opt_d.zero_grad(set_to_none=True)
            row = np.array([l3d.item(), liso.item(), lg.item(), ld.item()])
            if record_steps:
                result.steps.append(LossBreakdown(*row))
            sums += row * len(idx)
            count += len(idx)
        lb = LossBreakdown(*(sums / count))
        result.history.append(lb)
        log.info("rec epoch %d  l3d %.3f liso %.3f lg %.4f ld %.4f", epoch, *lb.as_row()[:4])
        if out_dir and cfg.checkpoint_every and epoch % cfg.checkpoint_every == 0:
            save_checkpoint(Path(out_dir) / f"rec_e{epoch:03d}.pt", recnet=G, discriminator=D)
    G.eval()
    D.eval()
    return result


def _abort(out_dir, last_good, epoch, batch, terms, G, D) -> TrainingAborted:
    G.load_state_dict(last_good["recnet"])
    D.load_state_dict(last_good["discriminator"])
    if out_dir:
        save_checkpoint(Path(out_dir) / "rec_last_good.pt", recnet=G, discriminator=D)
    return TrainingAborted(
        f"non-finite {', '.join(terms)} at epoch {epoch}, batch {batch}", last_good
    )


def write_history_csv(history: list[LossBreakdown], path) -> None:
    with open(path, "w", newline="") as fh:
        w = csv.writer(fh, lineterminator="\n")
        w.writerow(HISTORY_FIELDS)
        for i, lb in enumerate(history, 1):
            w.writerow([i, *(repr(float(v)) for v in lb.as_row())])


def read_history_csv(path) -> list[LossBreakdown]:
    with open(path, newline="") as fh:
        rows = list(csv.DictReader(fh))
    out = []
    for r in rows:
        lb = LossBreakdown(float(r["l3d"]), float(r["liso"]), float(r["lg"]), float(r["ld"]))
        if not math.isclose(lb.total, float(r["total"]), rel_tol=1e-12, abs_tol=1e-12):
            raise ValueError(f"inconsistent total in row {r['epoch']}")
        out.append(lb)
    return out
