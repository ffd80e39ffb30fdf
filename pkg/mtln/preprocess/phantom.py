import logging
import math
import numpy as np
from functools import partial
from scipy import ndimage

from mtln.common.ellipse import EllipseParams
from mtln.common.ellipse import ellipse_frame_coords
from mtln.common.ellipse import rasterize_ellipse
from mtln.preprocess.manifest import PHANTOM_PREFIX
from mtln.preprocess.manifest import Sample

MIN_FRAME_SIZE = 64
AXIS_RANGE = (0.15, 0.40)
MAX_AXIS_RATIO = 2.5
PIXEL_SIZE_RANGE_MM = (0.052, 0.326)
SPECKLE_LOOKS = 4
BLUR_SIGMA = 1.0
BAND_HALF_WIDTH = 1.0
BACKGROUND, INTERIOR, SKULL = 0.15, 0.35, 0.9


def phantom_id(index):
    return f"{PHANTOM_PREFIX}{index:05d}"


def sample_seed(seed, index):
    return int(np.random.SeedSequence([seed, index]).generate_state(1)[0])


def speckle_field(rng, shape, looks=SPECKLE_LOOKS):
    """Multiplicative unit-mean speckle, gamma distributed as in multi-look intensity images."""
    return rng.gamma(looks, 1 / looks, size=shape)


def random_ellipse(rng, height, width):
    size = min(height, width)
    while True:
        a, b = rng.uniform(*AXIS_RANGE, size=2) * size
        if max(a, b) / min(a, b) <= MAX_AXIS_RATIO:
            break
    theta = rng.uniform(0, math.pi)
    a, b = max(a, b), min(a, b)
    half_x = math.sqrt((a * math.cos(theta)) ** 2 + (b * math.sin(theta)) ** 2)
    half_y = math.sqrt((a * math.sin(theta)) ** 2 + (b * math.cos(theta)) ** 2)
    cx = rng.uniform(half_x + 1, width - 2 - half_x)
    cy = rng.uniform(half_y + 1, height - 2 - half_y)
    return EllipseParams(cx, cy, a, b, theta)


def skull_band(rng, ellipse, height, width):
    y, x = np.mgrid[0:height, 0:width]
    u, v = ellipse_frame_coords(ellipse, x, y)
    radius = np.sqrt((u / ellipse.a) ** 2 + (v / ellipse.b) ** 2)
    band = np.abs(radius - 1) * (ellipse.a + ellipse.b) / 2 <= BAND_HALF_WIDTH
    anomaly = np.arctan2(v / ellipse.b, u / ellipse.a)
    for _ in range(rng.integers(1, 4)):
        centre = rng.uniform(-math.pi, math.pi)
        half_gap = rng.uniform(0.1, 0.25)
        offset = np.angle(np.exp(1j * (anomaly - centre)))
        band &= np.abs(offset) > half_gap
    return band


def generate_phantom(seed, height, width, sample_id=None):
    if height < MIN_FRAME_SIZE or width < MIN_FRAME_SIZE:
        raise ValueError(
            f"Phantom frames must be at least {MIN_FRAME_SIZE}x{MIN_FRAME_SIZE}, "
            f"got {height}x{width}"
        )
    rng = np.random.default_rng(seed)
    ellipse = random_ellipse(rng, height, width)
    pixel_size_mm = rng.uniform(*PIXEL_SIZE_RANGE_MM)
    mask = rasterize_ellipse(ellipse, height, width)

    image = np.where(mask, INTERIOR, BACKGROUND)
    image[skull_band(rng, ellipse, height, width)] = SKULL
    image = image * speckle_field(rng, image.shape)
    image = np.clip(ndimage.gaussian_filter(image, BLUR_SIGMA), 0.0, 1.0).astype(np.float32)

    sample_id = phantom_id(0) if sample_id is None else sample_id
    return Sample(
        sample_id, image, mask, ellipse, pixel_size_mm, "phantom", f"{sample_id}:orig"
    )


def _generate_indexed(seed, height, width, index):
    return generate_phantom(sample_seed(seed, index), height, width, phantom_id(index))


def generate_phantoms(n, seed, height, width, executor=None):
    if n < 0:
        raise ValueError(f"Number of phantoms must be non-negative, got {n}")
    generate = partial(_generate_indexed, seed, height, width)
    indices = range(n)
    samples = list(map(generate, indices) if executor is None else executor.map(generate, indices))
    logging.info(f"Generated {len(samples)} phantoms of size {height}x{width}")
    return samples
