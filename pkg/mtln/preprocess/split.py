import logging
import math
import numpy as np

MIN_BASE_IMAGES = 10


def split_sizes(n, test_fraction=0.25, val_fraction=0.1):
    test = math.floor(test_fraction * n)
    val = math.floor(val_fraction * (n - test))
    return n - test - val, val, test


def split_dataset(manifest, seed, test_fraction=0.25, val_fraction=0.1):
    """Assign train/val/test per base image; augmented variants follow their base."""
    bases = manifest.base_ids()
    if len(bases) < MIN_BASE_IMAGES:
        raise ValueError(
            f"Splitting needs at least {MIN_BASE_IMAGES} base images, got {len(bases)}"
        )
    shuffled = [bases[i] for i in np.random.default_rng(seed).permutation(len(bases))]
    num_train, num_val, num_test = split_sizes(len(bases), test_fraction, val_fraction)
    assignment = {b: "test" for b in shuffled[:num_test]}
    assignment |= {b: "val" for b in shuffled[num_test : num_test + num_val]}
    assignment |= {b: "train" for b in shuffled[num_test + num_val :]}
    logging.info(
        f"Split {len(bases)} base images into {num_train} train, {num_val} val, {num_test} test"
    )
    return manifest.with_splits(assignment, seed=seed)
