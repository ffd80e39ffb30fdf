import pytest

from mtln.common.config import load_config
from mtln.preprocess.phantom import generate_phantoms

TINY_OVERRIDES = {
    "network": {
        "input_height": 16,
        "input_width": 16,
        "num_stages": 2,
        "widths": [2, 4],
        "fc_sizes": [4, 3],
    },
    "train": {"learning_rate": 0.01, "epochs": 2, "checkpoint_every_n_epoch": 1},
    "data": {"height": 64, "width": 64, "workers": 2},
}


@pytest.fixture
def tiny_config():
    def make(**train):
        overrides = TINY_OVERRIDES | {"train": TINY_OVERRIDES["train"] | train}
        return load_config(overrides=overrides)

    return make


@pytest.fixture(scope="session")
def phantoms():
    return generate_phantoms(4, seed=0, height=64, width=64)
