"""Synthetic binary shapes and a flood-fill reference for contour filling."""

import numpy as np
from scipy import ndimage

EIGHT = np.ones((3, 3), dtype=bool)


def disc(size, centre, radius):
    y, x = np.mgrid[:size, :size]
    return ((y - centre[0]) ** 2 + (x - centre[1]) ** 2 <= radius ** 2).astype(np.uint8)


def random_shape(rng, size=96):
    """Disc, annulus, or several blobs, each drawn from ``rng``."""
    kind = rng.integers(3)
    out = np.zeros((size, size), np.uint8)
    if kind == 0:
        c = rng.integers(25, size - 25, 2)
        out |= disc(size, c, int(rng.integers(6, 20)))
    elif kind == 1:
        c = rng.integers(28, size - 28, 2)
        r = int(rng.integers(12, 24))
        out |= disc(size, c, r) & ~disc(size, c, int(rng.integers(3, r - 4)))
    else:
        for _ in range(int(rng.integers(2, 5))):
            c = rng.integers(10, size - 10, 2)
            out |= disc(size, c, int(rng.integers(3, 12)))
    return out


def fill_oracle(binary):
    """Largest 8-connected component (pixel count), holes flood-filled."""
    lab, n = ndimage.label(binary, structure=EIGHT)
    if n == 0:
        return np.zeros_like(binary, dtype=bool)
    best = None
    for k in range(1, n + 1):
        comp = ndimage.binary_fill_holes(lab == k)
        ys, xs = np.nonzero(lab == k)
        # topmost, then leftmost, boundary start breaks ties
        key = (-int(comp.sum()), int(ys.min()), int(xs[ys == ys.min()].min()))
        if best is None or key < best[0]:
            best = (key, comp)
    return best[1]
