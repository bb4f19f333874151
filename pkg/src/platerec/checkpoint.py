"""Single checkpoint format: named tensors per model plus their configs.

A file holds any subset of {"odnet", "recnet", "discriminator"} and a hash
of the embedded configs, so a checkpoint can be matched to the run that
wrote it.
"""

from __future__ import annotations

import hashlib
import json
from pathlib import Path

import torch

from .adversary import Discriminator, DiscriminatorConfig
from .reconstructor import RecNet, RecNetConfig
from .segmenter import ODNet, SegmenterConfig

FORMAT = "platerec-checkpoint/1"

_KINDS = {
    "odnet": (ODNet, SegmenterConfig),
    "recnet": (RecNet, RecNetConfig),
    "discriminator": (Discriminator, DiscriminatorConfig),
}


def _hash(configs: dict) -> str:
    return hashlib.sha256(json.dumps(configs, sort_keys=True).encode()).hexdigest()[:16]


def save_checkpoint(path, extra: dict | None = None, **models) -> str:
    """``save_checkpoint(path, recnet=g, discriminator=d)``; returns the config hash."""
    entries, configs = {}, {}
    for name, model in models.items():
        if name not in _KINDS:
            raise ValueError(f"unknown model kind {name!r}")
        configs[name] = model.config.to_dict()
        entries[name] = {"config": configs[name], "tensors": model.state_dict()}
    if extra:
        configs["extra"] = extra
    h = _hash(configs)
    Path(path).parent.mkdir(parents=True, exist_ok=True)
    torch.save({"format": FORMAT, "models": entries, "extra": extra or {}, "config_hash": h}, path)
    return h


def load_checkpoint(path) -> dict:
    """Rebuild every model stored in ``path``; returns {name: model, "config_hash": ...}."""
    path = Path(path)
    if not path.exists():
        raise FileNotFoundError(f"no checkpoint at {path}")
    try:
        blob = torch.load(path, map_location="cpu", weights_only=True)
    except Exception as exc:  # torch raises a mix of pickle/runtime errors
        raise OSError(f"{path}: unreadable checkpoint ({type(exc).__name__})") from exc
    if not isinstance(blob, dict) or blob.get("format") != FORMAT:
        raise ValueError(f"{path}: not a {FORMAT} file")
    out = {"config_hash": blob["config_hash"], "extra": blob.get("extra", {})}
    for name, entry in blob["models"].items():
        cls, cfg_cls = _KINDS[name]
        model = cls(cfg_cls.from_dict(entry["config"]))
        model.load_state_dict(entry["tensors"])
        model.eval()
        out[name] = model
    return out
