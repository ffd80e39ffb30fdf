import copy
import json

DEFAULT_CONFIG = {
    "seed": 0,
    "network": {
        "input_height": 128,
        "input_width": 128,
        "num_stages": 4,
        "widths": [8, 16, 32, 64],
        "fc_sizes": [128, 64],
    },
    "loss": {
        "alpha1": 1.0,
        "alpha2": 2.0,
        "omega0": 30.0,
        "sigma": 10.0,
        "p_clip": 1e-7,
        "dice_smooth": 1e-6,
        "weight_map": "gaussian",
    },
    "train": {
        "learning_rate": 0.001,
        "momentum": 0.9,
        "epochs": 200,
        "batch_size": 1,
        "mode": "multi-task",
        "log_every_n_epoch": 1,
        "checkpoint_every_n_epoch": 10,
    },
    "data": {
        "height": 128,
        "width": 128,
        "external_height": 540,
        "external_width": 800,
        "test_fraction": 0.25,
        "val_fraction": 0.1,
        "workers": 4,
    },
    "paths": {
        "dataset": "data",
        "run": "runs/default",
    },
}


class ConfigError(ValueError):
    pass


def merge_config(defaults, overrides, path=""):
    unknown = sorted(set(overrides) - set(defaults))
    if unknown:
        raise ConfigError(f"Unknown config keys at '{path or '/'}': {', '.join(unknown)}")
    merged = copy.deepcopy(defaults)
    for key, value in overrides.items():
        if isinstance(defaults[key], dict):
            if not isinstance(value, dict):
                raise ConfigError(f"Config key '{path}/{key}' must be an object")
            merged[key] = merge_config(defaults[key], value, f"{path}/{key}")
        else:
            merged[key] = value
    return merged


def load_config(filepath=None, overrides=None):
    params = {}
    if filepath is not None:
        with open(filepath) as f:
            try:
                params = json.load(f)
            except json.JSONDecodeError as e:
                raise ConfigError(f"Config file {filepath} is not valid JSON: {e}")
    if not isinstance(params, dict):
        raise ConfigError(f"Config file {filepath} must hold a JSON object")
    config = merge_config(DEFAULT_CONFIG, params)
    if overrides:
        config = merge_config(config, overrides)
    validate_config(config)
    return config


def validate_config(config):
    from mtln.train.loss import LossConfig
    from mtln.train.model import NetworkConfig
    from mtln.train.trainer import TrainConfig

    try:
        TrainConfig.from_config(config)
        LossConfig.from_config(config["loss"])
        NetworkConfig.from_config(config["network"], seed=config["seed"])
    except (TypeError, ValueError) as e:
        raise ConfigError(str(e)) from e
    data = config["data"]
    if data["height"] < 64 or data["width"] < 64:
        raise ConfigError(
            f"Phantom frames must be at least 64x64, got {data['height']}x{data['width']}"
        )
    if not 0 < data["test_fraction"] < 1:
        raise ConfigError(f"test_fraction must lie in (0, 1), got {data['test_fraction']}")
    if not 0 <= data["val_fraction"] < 1:
        raise ConfigError(f"val_fraction must lie in [0, 1), got {data['val_fraction']}")
    if data["workers"] < 1:
        raise ConfigError(f"workers must be at least 1, got {data['workers']}")
    return config


def dump_config(config):
    return json.dumps(config, sort_keys=True, separators=(",", ":"))
