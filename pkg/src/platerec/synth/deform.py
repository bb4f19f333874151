"""Isometric thin-plate deformation states.

Every non-rest state is a generalized cylinder: the rest plane is rolled
along an in-plane axis by a cross-section curve that is parameterized by
arc length, so distances along the curve and along the rulings are kept.
The curve is given by its tangent angle

    theta(u) = curvature * u + sum_k amp_k * sin(freq_k * u + phase_k)

and integrated numerically (or in closed form for a pure bend).
"""

from __future__ import annotations

from dataclasses import dataclass, field, asdict

import numpy as np
from scipy.integrate import cumulative_simpson

from ..errors import GenerationError, ShapeError

GRID = 73


@dataclass
class SurfaceState:
    points: np.ndarray
    state_id: int = 0

    def __post_init__(self):
        p = np.asarray(self.points, dtype=np.float64)
        if p.ndim != 3 or p.shape[2] != 3 or p.shape[0] != p.shape[1]:
            raise ShapeError(f"expected (H, H, 3) point grid, got {p.shape}")
        self.points = p

    @property
    def grid(self) -> int:
        return self.points.shape[0]


def rest_grid(n: int = GRID) -> np.ndarray:
    """Flat plate spanning [-1, 1]^2 at z = 0, indexed [row, col] = [y, x]."""
    t = np.linspace(-1.0, 1.0, n)
    x, y = np.meshgrid(t, t)
    return np.stack([x, y, np.zeros_like(x)], axis=-1)


def rest_spacing(n: int = GRID) -> float:
    return 2.0 / (n - 1)


@dataclass(frozen=True)
class WaveParams:
    """One deformation: axis angle, bend curvature and sine components."""

    axis_angle: float = 0.0
    curvature: float = 0.0
    amps: tuple[float, ...] = ()
    freqs: tuple[float, ...] = ()
    phases: tuple[float, ...] = ()

    def max_turning(self, extent: float = np.sqrt(2.0)) -> float:
        """Upper bound on |theta(u)| over |u| <= extent."""
        return abs(self.curvature) * extent + float(np.sum(np.abs(self.amps)))


def tangent_angle(params: WaveParams, u: np.ndarray) -> np.ndarray:
    theta = params.curvature * u
    for a, w, p in zip(params.amps, params.freqs, params.phases):
        theta = theta + a * np.sin(w * u + p)
    return theta


def cross_section(params: WaveParams, u: np.ndarray, oversample: int = 64) -> tuple[np.ndarray, np.ndarray]:
    """Arc-length parameterized curve (s(u), h(u)) with s(0) = h(0) = 0."""
    u = np.asarray(u, dtype=np.float64)
    if not params.amps:
        k = params.curvature
        if k == 0.0:
            return u.copy(), np.zeros_like(u)
        return np.sin(k * u) / k, (1.0 - np.cos(k * u)) / k
    lim = float(np.max(np.abs(u))) if u.size else 0.0
    n = max(2, int(np.ceil(lim * oversample * (GRID - 1) / 2.0)))
    # cumulative Simpson on a fine grid each side of u = 0, then linear lookup
    fine = np.linspace(0.0, lim, 2 * n + 1)
    th = tangent_angle(params, fine)
    th_neg = tangent_angle(params, -fine)

    def integrate(f):
        return cumulative_simpson(f, x=fine, initial=0.0)

    s_pos, h_pos = integrate(np.cos(th)), integrate(np.sin(th))
    s_neg, h_neg = integrate(np.cos(th_neg)), integrate(np.sin(th_neg))
    a = np.abs(u)
    s = np.where(u >= 0, np.interp(a, fine, s_pos), -np.interp(a, fine, s_neg))
    h = np.where(u >= 0, np.interp(a, fine, h_pos), -np.interp(a, fine, h_neg))
    return s, h


def deform(rest: np.ndarray, params: WaveParams, oversample: int = 64) -> np.ndarray:
    """Roll a flat grid along ``params.axis_angle`` by the cross-section curve."""
    if params.curvature == 0.0 and not any(params.amps):
        return rest.copy()
    ax = np.array([np.cos(params.axis_angle), np.sin(params.axis_angle)])
    perp = np.array([-ax[1], ax[0]])
    xy = rest[..., :2]
    u = xy @ ax
    v = xy @ perp
    s, h = cross_section(params, u, oversample)
    out = np.empty_like(rest)
    out[..., 0] = s * ax[0] + v * perp[0]
    out[..., 1] = s * ax[1] + v * perp[1]
    out[..., 2] = h
    return out


def cylindrical_bend(curvature: float, axis_angle: float = 0.0, n: int = GRID) -> SurfaceState:
    return SurfaceState(deform(rest_grid(n), WaveParams(axis_angle, curvature)), 0)


@dataclass(frozen=True)
class IsometryAudit:
    mean_dev: float
    max_dev: float

    def passes(self, mean_tol: float = 0.02, max_tol: float = 0.05) -> bool:
        return self.mean_dev < mean_tol and self.max_dev < max_tol


def edge_lengths(points: np.ndarray) -> np.ndarray:
    """Lengths of all 4-neighbour edges, flattened."""
    p = np.asarray(points, dtype=np.float64)
    dx = np.linalg.norm(np.diff(p, axis=1), axis=-1)
    dy = np.linalg.norm(np.diff(p, axis=0), axis=-1)
    return np.concatenate([dx.ravel(), dy.ravel()])


def audit_isometry(points: np.ndarray) -> IsometryAudit:
    rel = np.abs(edge_lengths(points) / rest_spacing(points.shape[0]) - 1.0)
    return IsometryAudit(float(rel.mean()), float(rel.max()))


@dataclass
class DeformationConfig:
    kind: str = "mixed"  # flat | bend | wave | mixed
    grid: int = GRID
    max_curvature: float = 0.9
    max_amp: float = 0.45
    n_waves: int = 2
    freq_range: tuple[float, float] = (1.5, 4.5)
    speed_range: tuple[float, float] = (0.05, 0.2)
    episode_range: tuple[int, int] = (30, 90)
    max_turning: float = 0.45 * np.pi
    oversample: int = 64
    iso_mean_tol: float = 0.02
    iso_max_tol: float = 0.05

    def to_dict(self) -> dict:
        return asdict(self)


def _episode_params(rng: np.random.Generator, cfg: DeformationConfig) -> dict:
    kind = cfg.kind
    if kind == "mixed":
        kind = ("bend", "wave", "both")[int(rng.integers(3))]
    nw = cfg.n_waves if kind in ("wave", "both") else 0
    return dict(
        axis_angle=float(rng.uniform(0.0, np.pi)),
        curvature=float(rng.uniform(-1, 1) * cfg.max_curvature) if kind in ("bend", "both") else 0.0,
        amps=tuple(float(a) for a in rng.uniform(0.3, 1.0, nw) * cfg.max_amp / max(nw, 1) * rng.choice([-1, 1], nw)),
        freqs=tuple(float(f) for f in rng.uniform(*cfg.freq_range, nw)),
        phases=tuple(float(p) for p in rng.uniform(0, 2 * np.pi, nw)),
        speeds=tuple(float(s) for s in rng.uniform(*cfg.speed_range, nw) * rng.choice([-1, 1], nw)),
    )


def state_schedule(count: int, cfg: DeformationConfig, seed: int = 0) -> list[WaveParams]:
    """Smoothly varying parameters, one per state; state 0 is the rest plane.

    The sequence is cut into episodes; within each the deformation ramps up
    and back down with a sin^2 envelope while the waves travel, so
    consecutive states stay close and episode boundaries are flat.
    """
    if count < 1:
        raise GenerationError("count must be >= 1")
    rng = np.random.default_rng(seed)
    out: list[WaveParams] = []
    while len(out) < count:
        length = int(rng.integers(cfg.episode_range[0], cfg.episode_range[1] + 1))
        ep = _episode_params(rng, cfg)
        for t in range(length):
            env = 0.0 if cfg.kind == "flat" else np.sin(np.pi * t / length) ** 2
            out.append(WaveParams(
                axis_angle=ep["axis_angle"],
                curvature=env * ep["curvature"],
                amps=tuple(env * a for a in ep["amps"]),
                freqs=ep["freqs"],
                phases=tuple(p + s * t for p, s in zip(ep["phases"], ep["speeds"])),
            ))
    return out[:count]


def validate_params(params: WaveParams, cfg: DeformationConfig, state_id: int = 0) -> None:
    turning = params.max_turning()
    if turning >= cfg.max_turning:
        raise GenerationError(
            f"state {state_id}: tangent turning {turning:.3f} rad >= {cfg.max_turning:.3f} "
            f"(curvature={params.curvature:.3f}, amps={params.amps}); the cross-section "
            "would fold over"
        )


def generate_states(count: int, cfg: DeformationConfig | None = None, seed: int = 0) -> list[SurfaceState]:
    cfg = cfg or DeformationConfig()
    if cfg.kind not in ("flat", "bend", "wave", "mixed"):
        raise GenerationError(f"unknown deformation kind {cfg.kind!r}")
    rest = rest_grid(cfg.grid)
    states = []
    for i, params in enumerate(state_schedule(count, cfg, seed)):
        validate_params(params, cfg, i)
        pts = deform(rest, params, cfg.oversample)
        audit = audit_isometry(pts)
        if not audit.passes(cfg.iso_mean_tol, cfg.iso_max_tol):
            raise GenerationError(
                f"state {i}: isometry audit failed (mean {audit.mean_dev:.4f}, max "
                f"{audit.max_dev:.4f}) for curvature={params.curvature:.3f}, amps={params.amps}, "
                f"freqs={params.freqs}"
            )
        states.append(SurfaceState(pts, i))
    return states
