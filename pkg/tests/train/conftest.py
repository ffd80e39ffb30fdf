import numpy as np
import pytest

from mtln.common.ellipse import EllipseParams
from mtln.common.ellipse import normalize_ellipse
from mtln.common.ellipse import rasterize_ellipse
from mtln.common.ellipse import to_vector
from mtln.train.tensor import Tensor
from mtln.train.tensor import current_tape


@pytest.fixture(autouse=True)
def clear_tape():
    current_tape().clear()
    yield
    current_tape().clear()


@pytest.fixture
def head_example():
    def make(size=16, seed=0):
        rng = np.random.default_rng(seed)
        ellipse = EllipseParams(size / 2 - 0.5, size / 2 - 0.5, size / 3, size / 4, 0.3)
        mask = rasterize_ellipse(ellipse, size, size)
        image = np.where(mask, 0.6, 0.2) + 0.05 * rng.standard_normal((size, size))
        return {
            "id": f"example-{seed}",
            "image": Tensor(image[None, None]),
            "mask": mask,
            "weight_map": None,
            "target": to_vector(normalize_ellipse(ellipse, size, size)),
        }

    return make
