"""2D-3D dataset: generation, train/test split and on-disk layout.

Layout of a dataset directory::

    manifest.json
    surfaces/state_00000.f32    little-endian float32, (H, W, 3) row-major
    images/frame_000000.png     RGB render
    masks/frame_000000.png      renderer footprint (0/255)
"""

from __future__ import annotations

import hashlib
import json
import logging
from dataclasses import dataclass, field, asdict
from itertools import product
from pathlib import Path

import numpy as np
from PIL import Image

from ..errors import SplitError
from .deform import DeformationConfig, SurfaceState, generate_states
from .render import RenderConfig, RenderedFrame, render_state
from .textures import TEXTURE_NAMES, TEXTURELESS

log = logging.getLogger(__name__)

MANIFEST = "manifest.json"


def split_dataset(m: int, protocol: str = "blocks", block: int = 100,
                  test_per_block: int = 20) -> tuple[list[int], list[int]]:
    """Hold out the last ``test_per_block`` states of every full block.

    States of a trailing partial block go to training. With fewer than one
    block (or ``protocol="ratio"``) the last fifth of the sequence is held
    out instead.
    """
    if m < 5:
        raise SplitError(f"need at least 5 states to split, got {m}")
    if protocol not in ("blocks", "ratio"):
        raise SplitError(f"unknown split protocol {protocol!r}")
    if protocol == "blocks" and m >= block:
        test = [i for i in range(m - m % block) if i % block >= block - test_per_block]
    else:
        n_test = m // 5
        test = list(range(m - n_test, m))
    held = set(test)
    return [i for i in range(m) if i not in held], test


def config_hash(cfg: dict) -> str:
    return hashlib.sha256(json.dumps(cfg, sort_keys=True).encode()).hexdigest()[:16]


@dataclass
class DatasetConfig:
    states: int = 200
    textures: int = 4
    unknown_textures: tuple[int, ...] = (3,)
    textureless: bool = False
    lights: int = 3
    cameras: int = 3
    renders_per_state: int | None = 4
    protocol: str = "blocks"
    seed: int = 0
    deformation: DeformationConfig = field(default_factory=DeformationConfig)
    render: RenderConfig = field(default_factory=RenderConfig)

    def __post_init__(self):
        if isinstance(self.deformation, dict):
            d = dict(self.deformation)
            for k in ("freq_range", "speed_range", "episode_range"):
                if k in d:
                    d[k] = tuple(d[k])
            self.deformation = DeformationConfig(**d)
        if isinstance(self.render, dict):
            r = dict(self.render)
            for k in ("cameras", "lights"):
                if k in r:
                    r[k] = tuple(tuple(x) for x in r[k])
            self.render = RenderConfig(**r)
        self.unknown_textures = tuple(self.unknown_textures)
        if not 1 <= self.textures <= len(TEXTURE_NAMES):
            raise ValueError(f"textures must be in [1, {len(TEXTURE_NAMES)}]")
        if self.lights > len(self.render.lights) or self.cameras > len(self.render.cameras):
            raise ValueError("more lights/cameras requested than the render config defines")

    def texture_ids(self) -> list[int]:
        ids = list(range(self.textures))
        return ids + [TEXTURELESS] if self.textureless else ids

    def known_textures(self) -> list[int]:
        return [t for t in self.texture_ids() if t not in self.unknown_textures]

    def to_dict(self) -> dict:
        return json.loads(json.dumps(asdict(self)))


@dataclass
class FrameRecord:
    index: int
    state_id: int
    texture_id: int
    illumination_id: int
    camera_id: int
    image: str = ""
    mask: str = ""


@dataclass
class DatasetManifest:
    M: int
    N: int
    textures: list[dict]
    illuminations: list[dict]
    cameras: list[dict]
    train: list[int]
    test: list[int]
    states: list[str]
    frames: list[FrameRecord]
    config: dict
    config_hash: str
    protocol: str = "blocks"

    def __post_init__(self):
        self.frames = [f if isinstance(f, FrameRecord) else FrameRecord(**f) for f in self.frames]
        if set(self.train) & set(self.test):
            raise SplitError("train and test states overlap")
        if sorted(self.train + self.test) != list(range(self.M)):
            raise SplitError("train and test do not cover all states")

    def to_json(self) -> str:
        return json.dumps(asdict(self), indent=1, sort_keys=True) + "\n"

    @classmethod
    def from_json(cls, text: str) -> "DatasetManifest":
        return cls(**json.loads(text))

    def frames_of(self, states) -> list[FrameRecord]:
        keep = set(states)
        return [f for f in self.frames if f.state_id in keep]


def plan_frames(cfg: DatasetConfig, train: list[int], test: list[int]) -> list[FrameRecord]:
    """Train states get ``renders_per_state`` random known-texture combinations;
    test states get every texture x light x camera combination."""
    rng = np.random.default_rng(cfg.seed + 7)
    lights, cams = range(cfg.lights), range(cfg.cameras)
    known = list(product(cfg.known_textures(), lights, cams))
    every = list(product(cfg.texture_ids(), lights, cams))
    test_set = set(test)
    out: list[FrameRecord] = []
    for s in range(cfg.states):
        if s in test_set:
            combos = every
        elif cfg.renders_per_state is None or cfg.renders_per_state >= len(known):
            combos = known
        else:
            pick = np.sort(rng.choice(len(known), cfg.renders_per_state, replace=False))
            combos = [known[i] for i in pick]
        for t, l, c in combos:
            out.append(FrameRecord(len(out), s, t, l, c))
    return out


@dataclass
class Dataset:
    manifest: DatasetManifest
    surfaces: np.ndarray  # (M, G, G, 3) float64
    images: np.ndarray  # (K, S, S, 3) uint8
    footprints: np.ndarray  # (K, S, S) bool
    root: Path | None = None

    def frame(self, i: int) -> RenderedFrame:
        r = self.manifest.frames[i]
        return RenderedFrame(self.images[i], r.state_id, r.texture_id, r.illumination_id,
                             r.camera_id, self.footprints[i])

    def frame_indices(self, split: str) -> np.ndarray:
        states = set(self.manifest.train if split == "train" else self.manifest.test)
        return np.array([f.index for f in self.manifest.frames if f.state_id in states], dtype=np.int64)

    def state_ids(self, frame_idx) -> np.ndarray:
        return np.array([self.manifest.frames[i].state_id for i in frame_idx], dtype=np.int64)


def generate_dataset(cfg: DatasetConfig) -> Dataset:
    states = generate_states(cfg.states, cfg.deformation, seed=cfg.seed)
    train, test = split_dataset(cfg.states, cfg.protocol)
    plan = plan_frames(cfg, train, test)
    size = cfg.render.size
    images = np.zeros((len(plan), size, size, 3), dtype=np.uint8)
    feet = np.zeros((len(plan), size, size), dtype=bool)
    for rec in plan:
        f = render_state(states[rec.state_id], rec.texture_id, rec.illumination_id,
                         rec.camera_id, cfg.render)
        images[rec.index], feet[rec.index] = f.image, f.footprint
        rec.image = f"images/frame_{rec.index:06d}.png"
        rec.mask = f"masks/frame_{rec.index:06d}.png"
    conf = cfg.to_dict()
    known = set(cfg.known_textures())
    manifest = DatasetManifest(
        M=cfg.states,
        N=cfg.renders_per_state if cfg.renders_per_state is not None else len(known) * cfg.lights * cfg.cameras,
        textures=[{"id": t, "name": "textureless" if t == TEXTURELESS else TEXTURE_NAMES[t],
                   "known": t in known} for t in cfg.texture_ids()],
        illuminations=[{"id": i, "position": list(cfg.render.lights[i])} for i in range(cfg.lights)],
        cameras=[{"id": i, "azimuth": c[0], "elevation": c[1], "distance": c[2]}
                 for i, c in enumerate(cfg.render.cameras[:cfg.cameras])],
        train=train,
        test=test,
        states=[f"surfaces/state_{i:05d}.f32" for i in range(cfg.states)],
        frames=plan,
        config=conf,
        config_hash=config_hash(conf),
        protocol=cfg.protocol,
    )
    # round-trip through the on-disk precision so saved and in-memory datasets agree
    surfaces = np.stack([s.points for s in states]).astype("<f4").astype(np.float64)
    return Dataset(manifest, surfaces, images, feet)


def write_surface(path: Path, points: np.ndarray) -> None:
    np.asarray(points, dtype="<f4").tofile(path)


def read_surface(path: Path, grid: int = 73) -> np.ndarray:
    data = np.fromfile(path, dtype="<f4")
    if data.size != grid * grid * 3:
        raise OSError(f"{path}: expected {grid * grid * 3} floats, found {data.size}")
    return data.reshape(grid, grid, 3).astype(np.float64)


def save_dataset(ds: Dataset, root) -> Path:
    root = Path(root)
    for sub in ("surfaces", "images", "masks"):
        (root / sub).mkdir(parents=True, exist_ok=True)
    m = ds.manifest
    for i, rel in enumerate(m.states):
        write_surface(root / rel, ds.surfaces[i])
    for rec in m.frames:
        Image.fromarray(ds.images[rec.index]).save(root / rec.image)
        Image.fromarray(ds.footprints[rec.index].astype(np.uint8) * 255).save(root / rec.mask)
    (root / MANIFEST).write_text(m.to_json())
    ds.root = root
    return root


def load_dataset(root, load_images: bool = True) -> Dataset:
    root = Path(root)
    mpath = root / MANIFEST
    if not mpath.exists():
        raise FileNotFoundError(f"no manifest at {mpath}")
    m = DatasetManifest.from_json(mpath.read_text())
    missing = [str(root / p) for p in m.states if not (root / p).exists()]
    if load_images:
        missing += [str(root / f.image) for f in m.frames if not (root / f.image).exists()]
    if missing:
        raise FileNotFoundError("missing dataset files: " + ", ".join(missing[:10])
                                + (f" (+{len(missing) - 10} more)" if len(missing) > 10 else ""))
    grid = m.config.get("deformation", {}).get("grid", 73)
    surfaces = np.stack([read_surface(root / p, grid) for p in m.states])
    if load_images and m.frames:
        images = np.stack([np.asarray(Image.open(root / f.image).convert("RGB")) for f in m.frames])
        feet = np.stack([np.asarray(Image.open(root / f.mask)) > 0 for f in m.frames])
    else:
        images = np.zeros((0, 0, 0, 3), np.uint8)
        feet = np.zeros((0, 0, 0), bool)
    return Dataset(m, surfaces, images, feet, root)
