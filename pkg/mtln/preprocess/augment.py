import logging
import math
import numpy as np

from mtln.common.ellipse import EllipseParams
from mtln.common.ellipse import rasterize_ellipse
from mtln.common.image import image_center
from mtln.common.image import rotate
from mtln.common.image import rotate_points
from mtln.preprocess.manifest import base_id

ROTATION_DEGREES = (-60, -40, -20, 20, 40, 60)
FLIPS = ("hflip", "vflip")


def rotation_tag(degrees):
    return f"rot{degrees:+d}"


def variant_tags():
    return ["orig", *FLIPS, *(rotation_tag(d) for d in ROTATION_DEGREES)]


def _variant(sample, tag, image, ellipse):
    root = base_id(sample.lineage)
    ellipse = ellipse.canonical()
    height, width = image.shape
    return sample._replace(
        id=sample.id if tag == "orig" else f"{root}_{tag}",
        image=image,
        mask=rasterize_ellipse(ellipse, height, width),
        ellipse=ellipse,
        lineage=f"{root}:{tag}",
    )


def hflip(sample):
    e = sample.ellipse
    width = sample.image.shape[1]
    flipped = EllipseParams(width - 1 - e.cx, e.cy, e.a, e.b, math.pi - e.theta)
    return _variant(sample, "hflip", np.ascontiguousarray(sample.image[:, ::-1]), flipped)


def vflip(sample):
    e = sample.ellipse
    height = sample.image.shape[0]
    flipped = EllipseParams(e.cx, height - 1 - e.cy, e.a, e.b, -e.theta)
    return _variant(sample, "vflip", np.ascontiguousarray(sample.image[::-1, :]), flipped)


def rotate_sample(sample, degrees):
    angle = math.radians(degrees)
    e = sample.ellipse
    cx, cy = rotate_points(e.cx, e.cy, angle, image_center(sample.image.shape))
    rotated = EllipseParams(cx, cy, e.a, e.b, e.theta + angle)
    return _variant(sample, rotation_tag(degrees), rotate(sample.image, angle, order=1), rotated)


def rotation_keeps_head(sample, angle):
    """True when every foreground pixel of the mask lands inside the frame after rotation."""
    if angle == 0:
        return True
    height, width = sample.mask.shape
    y, x = np.nonzero(sample.mask)
    x, y = rotate_points(x, y, angle, image_center(sample.mask.shape))
    return bool(
        np.all((x >= -0.5) & (x < width - 0.5) & (y >= -0.5) & (y < height - 0.5))
    )


def augment_sample(sample):
    if not sample.lineage.endswith(":orig"):
        raise ValueError(f"Sample {sample.id} is already an augmented variant ({sample.lineage})")
    candidates = [sample._replace(lineage=f"{base_id(sample.lineage)}:orig")]
    candidates += [hflip(sample), vflip(sample)]
    for degrees in ROTATION_DEGREES:
        if rotation_keeps_head(sample, math.radians(degrees)):
            candidates.append(rotate_sample(sample, degrees))
        else:
            logging.debug(f"Dropping {rotation_tag(degrees)} of {sample.id}, head leaves frame")
    return candidates


def augment_dataset(samples, executor=None):
    augmented = map(augment_sample, samples) if executor is None else executor.map(
        augment_sample, samples
    )
    result = [s for variants in augmented for s in variants]
    candidates = len(samples) * len(variant_tags())
    logging.info(
        f"Augmented {len(samples)} images into {len(result)} samples, "
        f"dropped {candidates - len(result)} of {candidates} candidates"
    )
    return result
