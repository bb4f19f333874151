"""PNG figures: loss history, occlusion heatmap, e3D histograms."""

from __future__ import annotations

from pathlib import Path

import matplotlib

matplotlib.use("Agg")
import matplotlib.pyplot as plt  # noqa: E402
import numpy as np  # noqa: E402


def plot_history(history, path) -> Path:
    """``history`` is a list of LossBreakdown rows."""
    rows = np.array([h.as_row() for h in history])
    epochs = np.arange(1, len(rows) + 1)
    fig, axes = plt.subplots(1, 2, figsize=(9, 3.5))
    for j, name in enumerate(("L_3D", "L_iso")):
        axes[0].plot(epochs, rows[:, j], label=name)
    axes[0].set_yscale("log")
    for j, name in ((2, "L_G"), (3, "L_D")):
        axes[1].plot(epochs, rows[:, j], label=name)
    for ax in axes:
        ax.set_xlabel("epoch")
        ax.legend()
    fig.tight_layout()
    fig.savefig(path, dpi=100)
    plt.close(fig)
    return Path(path)


def plot_occlusion(result, path) -> Path:
    grid = np.asarray(result.grid)
    fig, ax = plt.subplots(figsize=(4.5, 4))
    im = ax.imshow(grid, origin="lower", cmap="magma")
    ax.set_xticks(range(len(result.counts)), result.counts)
    ax.set_yticks(range(len(result.radii)), result.radii)
    ax.set_xlabel("occluders")
    ax.set_ylabel("radius [px]")
    fig.colorbar(im, ax=ax, label="mean e3D")
    fig.tight_layout()
    fig.savefig(path, dpi=100)
    plt.close(fig)
    return Path(path)


def plot_e3d_histograms(groups: dict, path, bins: int = 30) -> Path:
    """``groups`` maps a label to an array of per-frame e3D values."""
    fig, ax = plt.subplots(figsize=(5, 3.5))
    for label, vals in groups.items():
        ax.hist(np.asarray(vals), bins=bins, histtype="step", label=str(label))
    ax.set_xlabel("e3D")
    ax.set_ylabel("frames")
    ax.legend()
    fig.tight_layout()
    fig.savefig(path, dpi=100)
    plt.close(fig)
    return Path(path)
