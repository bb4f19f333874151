import json

import numpy as np
import pytest
from hypothesis import given, strategies as st

from platerec.config import content_hash, parse_overrides, parse_value, resolve, write_snapshot
from platerec.errors import ConfigError
from platerec.synth import DatasetConfig
from platerec.synth.masks import MaskSample, load_mask_set, save_mask_set
from platerec.trainer import TrainConfig


def test_parse_value_types():
    assert parse_value("3") == 3
    assert parse_value("0.5") == 0.5
    assert parse_value("true") is True
    assert parse_value("[1, 2]") == [1, 2]
    assert parse_value("bend") == "bend"


def test_precedence(tmp_path):
    f = tmp_path / "c.json"
    f.write_text(json.dumps({"learning_rate": 0.01, "batch_size": 4}))
    cfg = resolve(TrainConfig, f, {"batch_size": 2})
    assert (cfg.learning_rate, cfg.batch_size, cfg.epochs_rec) == (0.01, 2, TrainConfig().epochs_rec)


def test_nested_keys(tmp_path):
    f = tmp_path / "c.json"
    f.write_text(json.dumps({"deformation": {"kind": "bend"}}))
    cfg = resolve(DatasetConfig, f, parse_overrides(["deformation.max_curvature=0.3"]))
    assert cfg.deformation.kind == "bend" and cfg.deformation.max_curvature == 0.3


@pytest.mark.parametrize("bad", [{"nope": 1}, {"states.x": 1}, {"deformation.nope": 2}])
def test_unknown_keys(bad):
    with pytest.raises(ConfigError):
        resolve(DatasetConfig, None, bad)


def test_invalid_values_and_files(tmp_path):
    with pytest.raises(ConfigError):
        resolve(TrainConfig, None, {"batch_size": 0})
    f = tmp_path / "c.json"
    f.write_text("{not json")
    with pytest.raises(ConfigError):
        resolve(TrainConfig, f)
    f.write_text("[1]")
    with pytest.raises(ConfigError):
        resolve(TrainConfig, f)
    with pytest.raises(FileNotFoundError):
        resolve(TrainConfig, tmp_path / "missing.json")


@given(st.dictionaries(st.text(min_size=1, max_size=5), st.integers(), max_size=5))
def test_hash_ignores_key_order(d):
    assert content_hash(d) == content_hash(dict(reversed(list(d.items()))))


def test_snapshot(tmp_path):
    h = write_snapshot(tmp_path, {"a": 1})
    assert (tmp_path / "config.sha256").read_text().strip() == h
    assert json.loads((tmp_path / "config.json").read_text()) == {"a": 1}


def test_mask_set_round_trip(tmp_path):
    rng = np.random.default_rng(0)
    samples = [MaskSample(rng.integers(0, 256, (16, 16, 3), dtype=np.uint8),
                          (rng.random((16, 16)) > 0.5).astype(np.uint8)) for _ in range(5)]
    save_mask_set(samples, tmp_path, ratio=0.8)
    train, test = load_mask_set(tmp_path)
    assert len(train) == 4 and len(test) == 1
    for a, b in zip(train + test, samples):
        assert np.array_equal(a.image, b.image) and np.array_equal(a.mask, b.mask)
    (tmp_path / "masks" / "sample_00000.png").unlink()
    with pytest.raises(FileNotFoundError, match="sample_00000"):
        load_mask_set(tmp_path)
