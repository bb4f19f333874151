"""CPU rasterizer: pinhole camera, point light, Lambertian shading.

Triangles are rasterized in bulk with numpy: every triangle emits candidate
pixels from its bounding box, barycentric tests keep the covered ones and a
sort-based z-buffer picks the nearest fragment per pixel.
"""

from __future__ import annotations

from dataclasses import dataclass, field, asdict
from functools import lru_cache

import numpy as np

from ..errors import RenderError
from .deform import SurfaceState
from .textures import TEXTURELESS, make_texture, sample_texture

DEFAULT_CAMERAS = (
    (0.0, 0.0, 3.2),
    (20.0, 0.0, 3.2),
    (-20.0, 0.0, 3.2),
    (0.0, 20.0, 3.2),
    (0.0, -20.0, 3.2),
)
DEFAULT_LIGHTS = (
    (0.0, 0.0, 3.0),
    (2.0, 1.5, 2.5),
    (-2.0, 1.5, 2.5),
    (1.5, -2.0, 2.5),
    (-1.5, -2.0, 2.5),
)


@dataclass
class RenderConfig:
    size: int = 224
    fov_deg: float = 45.0
    cameras: tuple = DEFAULT_CAMERAS  # (azimuth deg, elevation deg, distance)
    lights: tuple = DEFAULT_LIGHTS  # world positions
    ambient: float = 0.2
    texture_seed: int = 0

    def to_dict(self) -> dict:
        return asdict(self)


@dataclass
class RenderedFrame:
    image: np.ndarray  # (size, size, 3) uint8
    state_id: int
    texture_id: int
    illumination_id: int
    camera_id: int
    footprint: np.ndarray | None = None  # (size, size) bool


def camera_pose(az_deg: float, el_deg: float, dist: float) -> tuple[np.ndarray, np.ndarray]:
    """(R, C): world -> camera rotation (x right, y down, z forward) and centre."""
    az, el = np.radians(az_deg), np.radians(el_deg)
    c = dist * np.array([np.sin(az) * np.cos(el), np.sin(el), np.cos(az) * np.cos(el)])
    fwd = -c / np.linalg.norm(c)
    right = np.cross(fwd, [0.0, 1.0, 0.0])
    right /= np.linalg.norm(right)
    down = np.cross(fwd, right)
    return np.stack([right, down, fwd]), c


def focal_length(cfg: RenderConfig) -> float:
    return 0.5 * cfg.size / np.tan(np.radians(cfg.fov_deg) / 2)


def project(points: np.ndarray, camera_id: int, cfg: RenderConfig) -> tuple[np.ndarray, np.ndarray]:
    """World points (..., 3) -> pixel coordinates (..., 2) and camera depth."""
    R, c = camera_pose(*cfg.cameras[camera_id])
    pc = (points - c) @ R.T
    f = focal_length(cfg)
    z = pc[..., 2]
    xy = f * pc[..., :2] / z[..., None] + cfg.size / 2
    return xy, z


def grid_triangles(n: int) -> np.ndarray:
    idx = np.arange(n * n).reshape(n, n)
    a, b = idx[:-1, :-1].ravel(), idx[:-1, 1:].ravel()
    c, d = idx[1:, :-1].ravel(), idx[1:, 1:].ravel()
    return np.concatenate([np.stack([a, b, d], 1), np.stack([a, d, c], 1)])


def vertex_normals(points: np.ndarray) -> np.ndarray:
    du = np.gradient(points, axis=1)
    dv = np.gradient(points, axis=0)
    n = np.cross(du, dv)
    return n / np.maximum(np.linalg.norm(n, axis=-1, keepdims=True), 1e-12)


@dataclass
class Fragments:
    pixel: np.ndarray  # flat pixel index
    tri: np.ndarray
    bary: np.ndarray  # perspective-correct weights (K, 3)


def rasterize(xy: np.ndarray, z: np.ndarray, tris: np.ndarray, size: int,
              max_candidates: int = 4_000_000) -> Fragments:
    p = xy[tris]  # (T, 3, 2)
    zt = z[tris]
    keep = np.all(zt > 1e-6, axis=1)
    lo = np.ceil(p.min(axis=1) - 0.5).astype(np.int64)
    hi = np.floor(p.max(axis=1) - 0.5).astype(np.int64)
    lo, hi = np.maximum(lo, 0), np.minimum(hi, size - 1)
    keep &= np.all(hi >= lo, axis=1)
    ids = np.nonzero(keep)[0]
    if ids.size == 0:
        return Fragments(np.zeros(0, np.int64), np.zeros(0, np.int64), np.zeros((0, 3)))
    ext = (hi[ids] - lo[ids] + 1)
    kx, ky = int(ext[:, 0].max()), int(ext[:, 1].max())
    chunk = max(1, max_candidates // (kx * ky))
    ox, oy = np.meshgrid(np.arange(kx), np.arange(ky))
    ox, oy = ox.ravel(), oy.ravel()
    out_pix, out_tri, out_w, out_depth = [], [], [], []
    for s in range(0, ids.size, chunk):
        t = ids[s:s + chunk]
        px = lo[t, 0][:, None] + ox[None]
        py = lo[t, 1][:, None] + oy[None]
        valid = (px <= hi[t, 0][:, None]) & (py <= hi[t, 1][:, None])
        cx, cy = px + 0.5, py + 0.5
        a, b, c = p[t, 0], p[t, 1], p[t, 2]
        area = (b[:, 0] - a[:, 0]) * (c[:, 1] - a[:, 1]) - (b[:, 1] - a[:, 1]) * (c[:, 0] - a[:, 0])
        ok = np.abs(area) > 1e-12
        area = np.where(ok, area, 1.0)[:, None]

        def edge(p0, p1):
            return ((p1[:, 0:1] - p0[:, 0:1]) * (cy - p0[:, 1:2])
                    - (p1[:, 1:2] - p0[:, 1:2]) * (cx - p0[:, 0:1])) / area

        w0, w1, w2 = edge(b, c), edge(c, a), edge(a, b)
        eps = -1e-9
        inside = valid & ok[:, None] & (w0 >= eps) & (w1 >= eps) & (w2 >= eps)
        ti, ki = np.nonzero(inside)
        w = np.stack([w0[ti, ki], w1[ti, ki], w2[ti, ki]], axis=1)
        tri = t[ti]
        inv_z = w / zt[tri]
        depth = 1.0 / inv_z.sum(axis=1)
        out_pix.append(py[ti, ki] * size + px[ti, ki])
        out_tri.append(tri)
        out_w.append(inv_z * depth[:, None])
        out_depth.append(depth)
    pix = np.concatenate(out_pix)
    depth = np.concatenate(out_depth)
    tri = np.concatenate(out_tri)
    order = np.lexsort((tri, depth, pix))
    first = np.ones(order.size, dtype=bool)
    first[1:] = pix[order][1:] != pix[order][:-1]
    sel = order[first]
    return Fragments(pix[sel], tri[sel], np.concatenate(out_w)[sel])


@lru_cache(maxsize=16)
def _texture(texture_id: int, seed: int) -> np.ndarray:
    return make_texture(texture_id, seed=seed)


def render_state(state: SurfaceState, texture_id: int, illumination_id: int, camera_id: int,
                 cfg: RenderConfig | None = None) -> RenderedFrame:
    cfg = cfg or RenderConfig()
    if not 0 <= camera_id < len(cfg.cameras):
        raise RenderError(f"camera id {camera_id} not in [0, {len(cfg.cameras)})")
    if not 0 <= illumination_id < len(cfg.lights):
        raise RenderError(f"illumination id {illumination_id} not in [0, {len(cfg.lights)})")
    pts = state.points
    n = pts.shape[0]
    verts = pts.reshape(-1, 3)
    xy, z = project(verts, camera_id, cfg)
    tris = grid_triangles(n)
    frags = rasterize(xy, z, tris, cfg.size)
    if frags.pixel.size == 0:
        raise RenderError(f"state {state.state_id} lies entirely outside camera {camera_id}'s frustum")

    w = frags.bary[..., None]
    tv = tris[frags.tri]
    pos = (verts[tv] * w).sum(axis=1)
    nrm = (vertex_normals(pts).reshape(-1, 3)[tv] * w).sum(axis=1)
    nrm /= np.maximum(np.linalg.norm(nrm, axis=1, keepdims=True), 1e-12)
    t = np.linspace(0.0, 1.0, n)
    uu, vv = np.meshgrid(t, t)
    uv = (np.stack([uu, vv], -1).reshape(-1, 2)[tv] * w).sum(axis=1)

    _, cam = camera_pose(*cfg.cameras[camera_id])
    light = np.asarray(cfg.lights[illumination_id], dtype=np.float64)
    to_cam = cam - pos
    # two-sided surface: shade the side facing the camera
    nrm *= np.where((nrm * to_cam).sum(1) < 0, -1.0, 1.0)[:, None]
    to_light = light - pos
    dist2 = (to_light ** 2).sum(1)
    lam = np.clip((nrm * to_light).sum(1) / np.sqrt(dist2), 0.0, None)
    falloff = (light @ light) / dist2
    shade = cfg.ambient + (1.0 - cfg.ambient) * lam * falloff
    albedo = sample_texture(_texture(texture_id, cfg.texture_seed), uv)
    rgb = np.clip(albedo * shade[:, None], 0.0, 1.0)

    img = np.zeros((cfg.size * cfg.size, 3), dtype=np.uint8)
    img[frags.pixel] = np.round(rgb * 255).astype(np.uint8)
    foot = np.zeros(cfg.size * cfg.size, dtype=bool)
    foot[frags.pixel] = True
    return RenderedFrame(
        image=img.reshape(cfg.size, cfg.size, 3),
        state_id=state.state_id,
        texture_id=texture_id,
        illumination_id=illumination_id,
        camera_id=camera_id,
        footprint=foot.reshape(cfg.size, cfg.size),
    )
