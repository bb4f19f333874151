"""Slow reference implementations used only by the tests.

Each one is written with explicit Python loops and ``math`` so that it
shares no code path with the vectorized implementations.
"""

import math


def sad_oracle(pred, gt):
    b, h, w, c = pred.shape
    total = 0.0
    for n in range(b):
        s = 0.0
        for i in range(h):
            for j in range(w):
                for k in range(c):
                    s += abs(float(pred[n, i, j, k]) - float(gt[n, i, j, k]))
        total += s
    return total / b


def gaussian_weights(sigma, size):
    r = size // 2
    w = [[math.exp(-((x * x + y * y) / (2.0 * sigma * sigma))) / (2 * math.pi * sigma * sigma)
          for x in range(-r, r + 1)] for y in range(-r, r + 1)]
    s = sum(sum(row) for row in w)
    return [[v / s for v in row] for row in w]


def smooth_oracle(surface, sigma, size):
    """Replicate-padded convolution by index clamping."""
    h, w, c = surface.shape
    kw = gaussian_weights(sigma, size)
    r = size // 2
    out = [[[0.0] * c for _ in range(w)] for _ in range(h)]
    for i in range(h):
        for j in range(w):
            for k in range(c):
                acc = 0.0
                for di in range(-r, r + 1):
                    for dj in range(-r, r + 1):
                        ii = min(max(i + di, 0), h - 1)
                        jj = min(max(j + dj, 0), w - 1)
                        acc += kw[di + r][dj + r] * float(surface[ii, jj, k])
                out[i][j][k] = acc
    return out


def iso_oracle(pred, sigma, size):
    b, h, w, c = pred.shape
    total = 0.0
    for n in range(b):
        sm = smooth_oracle(pred[n], sigma, size)
        for i in range(h):
            for j in range(w):
                for k in range(c):
                    total += abs(sm[i][j][k] - float(pred[n, i, j, k]))
    return total / b


def bce_gen_oracle(d_fake):
    return -sum(math.log(float(p)) for p in d_fake) / len(d_fake)


def bce_disc_oracle(d_real, d_fake):
    r = sum(math.log(float(p)) for p in d_real) / len(d_real)
    f = sum(math.log(1.0 - float(p)) for p in d_fake) / len(d_fake)
    return -(r + f)


def e3d_oracle(pred, gt):
    """Double loop over frames and entries."""
    b = pred.shape[0]
    flat_p = pred.reshape(b, -1)
    flat_g = gt.reshape(b, -1)
    total = 0.0
    for n in range(b):
        num = 0.0
        den = 0.0
        for k in range(flat_g.shape[1]):
            d = float(flat_g[n, k]) - float(flat_p[n, k])
            num += d * d
            den += float(flat_g[n, k]) ** 2
        total += math.sqrt(num) / math.sqrt(den)
    return total / b


def otsu_oracle(values, bins=256):
    """Brute force over every candidate level; returns the first best level."""
    levels = [min(max(int(round(float(v) * (bins - 1))), 0), bins - 1) for v in values.ravel()]
    n = len(levels)
    best_k, best_var = None, -1.0
    for k in range(bins):
        lo = [l for l in levels if l <= k]
        hi = [l for l in levels if l > k]
        if not lo or not hi:
            continue
        w0, w1 = len(lo) / n, len(hi) / n
        m0, m1 = sum(lo) / len(lo), sum(hi) / len(hi)
        var = w0 * w1 * (m0 - m1) ** 2
        if var > best_var + 1e-12:
            best_k, best_var = k, var
    return best_k


def central_difference(f, x, eps):
    """Numerical gradient of scalar f at flat list x."""
    g = []
    for i in range(len(x)):
        xp = list(x)
        xm = list(x)
        xp[i] += eps
        xm[i] -= eps
        g.append((f(xp) - f(xm)) / (2 * eps))
    return g
