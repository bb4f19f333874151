"""Run configuration: defaults < config file < command-line overrides.

Config files are JSON objects whose keys mirror the dataclass fields.
Nested dataclasses (the deformation and render sections of a dataset
config) are addressed with dotted override keys, e.g.
``deformation.max_curvature=0.5``.
"""

from __future__ import annotations

import dataclasses
import hashlib
import json
from pathlib import Path

from .errors import ConfigError


def parse_value(text: str):
    """JSON literal when it parses, raw string otherwise (``kind=bend``)."""
    try:
        return json.loads(text)
    except json.JSONDecodeError:
        return text


def parse_overrides(items) -> dict:
    out = {}
    for item in items or ():
        key, sep, val = item.partition("=")
        if not sep or not key:
            raise ConfigError(f"override {item!r} is not key=value")
        out[key.strip()] = parse_value(val.strip())
    return out


def _known_fields(cls) -> dict:
    return {f.name: f for f in dataclasses.fields(cls)}


def _merge(base: dict, upd: dict, cls, prefix: str = "") -> None:
    fields = _known_fields(cls)
    for key, val in upd.items():
        head, _, rest = key.partition(".")
        if head not in fields:
            raise ConfigError(f"unknown config key {prefix + head!r}")
        sub = base.get(head)
        if rest or (isinstance(val, dict) and isinstance(sub, dict)):
            typ = fields[head].default_factory() if fields[head].default_factory is not dataclasses.MISSING else None
            if not dataclasses.is_dataclass(typ):
                raise ConfigError(f"config key {prefix + head!r} has no sub-keys")
            _merge(sub, {rest: val} if rest else val, type(typ), prefix + head + ".")
        else:
            base[head] = val


def resolve(cls, file=None, overrides: dict | None = None):
    """Build ``cls`` from its defaults, then the JSON ``file``, then ``overrides``."""
    data = json.loads(json.dumps(dataclasses.asdict(cls())))
    if file is not None:
        path = Path(file)
        try:
            loaded = json.loads(path.read_text())
        except json.JSONDecodeError as exc:
            raise ConfigError(f"{path}: invalid JSON ({exc.msg} at line {exc.lineno})") from None
        if not isinstance(loaded, dict):
            raise ConfigError(f"{path}: expected a JSON object")
        _merge(data, loaded, cls)
    if overrides:
        _merge(data, overrides, cls)
    try:
        return cls(**data)
    except (TypeError, ValueError) as exc:
        raise ConfigError(str(exc)) from None


def config_dict(cfg) -> dict:
    return json.loads(json.dumps(dataclasses.asdict(cfg)))


def content_hash(data: dict) -> str:
    return hashlib.sha256(json.dumps(data, sort_keys=True).encode()).hexdigest()


def write_snapshot(out_dir, data: dict, name: str = "config") -> str:
    """Write ``<name>.json`` and ``<name>.sha256`` under ``out_dir``; returns the hash."""
    out = Path(out_dir)
    out.mkdir(parents=True, exist_ok=True)
    (out / f"{name}.json").write_text(json.dumps(data, indent=1, sort_keys=True) + "\n")
    h = content_hash(data)
    (out / f"{name}.sha256").write_text(h + "\n")
    return h
