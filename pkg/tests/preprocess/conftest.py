import numpy as np
import pytest

from mtln.common.ellipse import EllipseParams
from mtln.common.ellipse import rasterize_ellipse
from mtln.preprocess.manifest import Sample


@pytest.fixture
def make_sample():
    def make(ellipse=EllipseParams(31.5, 31.5, 10, 7, 0.3), size=64, sample_id="phantom-00000"):
        image = np.random.default_rng(0).uniform(size=(size, size)).astype(np.float32)
        return Sample(
            sample_id,
            image,
            rasterize_ellipse(ellipse, size, size),
            ellipse,
            0.1,
            "phantom",
            f"{sample_id}:orig",
        )

    return make
