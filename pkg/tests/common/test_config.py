import json
import pytest
from pathlib import Path

from mtln.common.config import DEFAULT_CONFIG
from mtln.common.config import ConfigError
from mtln.common.config import dump_config
from mtln.common.config import load_config

CONFIG_DIR = Path(__file__).parents[2] / "config"


def write_config(tmp_path, config):
    path = tmp_path / "config.json"
    path.write_text(json.dumps(config))
    return path


def test_defaults():
    assert load_config() == DEFAULT_CONFIG


def test_partial_override(tmp_path):
    config = load_config(write_config(tmp_path, {"train": {"epochs": 5}}))
    assert config["train"]["epochs"] == 5
    assert config["train"]["momentum"] == DEFAULT_CONFIG["train"]["momentum"]


def test_seed_override(tmp_path):
    config = load_config(write_config(tmp_path, {"seed": 3}), {"seed": 11})
    assert config["seed"] == 11


@pytest.mark.parametrize("name", ["config.json", "config.dev.json"])
def test_shipped_configs_load(name):
    config = load_config(CONFIG_DIR / name)
    assert config["network"]["num_stages"] == len(config["network"]["widths"])
    assert config["train"]["learning_rate"] == DEFAULT_CONFIG["train"]["learning_rate"]


@pytest.mark.parametrize(
    "overrides",
    [
        {"trian": {}},
        {"train": {"epochs": 5, "epoch": 5}},
        {"train": 5},
        {"loss": {"sigma": 0}},
        {"loss": {"weight_map": "linear"}},
        {"train": {"mode": "ellipse-only"}},
        {"network": {"input_height": 100}},
        {"data": {"height": 32}},
        {"data": {"test_fraction": 1.5}},
        {"data": {"workers": 0}},
    ],
)
def test_invalid_config(tmp_path, overrides):
    with pytest.raises(ConfigError):
        load_config(write_config(tmp_path, overrides))


def test_malformed_json(tmp_path):
    path = tmp_path / "config.json"
    path.write_text("{not json")
    with pytest.raises(ConfigError):
        load_config(path)
    path.write_text("[1, 2]")
    with pytest.raises(ConfigError):
        load_config(path)


def test_dump_config_is_canonical():
    config = load_config()
    assert json.loads(dump_config(config)) == config
    assert dump_config(config) == dump_config(json.loads(json.dumps(config)))


def test_split_fraction_bounds(tmp_path):
    config = load_config(write_config(tmp_path, {"data": {"val_fraction": 0.0}}))
    assert config["data"]["val_fraction"] == 0.0
    with pytest.raises(ConfigError, match=r"val_fraction must lie in \[0, 1\)"):
        load_config(write_config(tmp_path, {"data": {"val_fraction": 1.0}}))
    with pytest.raises(ConfigError, match=r"test_fraction must lie in \(0, 1\)"):
        load_config(write_config(tmp_path, {"data": {"test_fraction": 0.0}}))
