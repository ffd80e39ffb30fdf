import numpy as np
from functools import partial

from mtln.common.ellipse import normalize_ellipse
from mtln.common.ellipse import to_vector
from mtln.common.image import resize
from mtln.train.loss import boundary_weight_map
from mtln.train.tensor import Tensor


def image_tensor(image, input_size):
    resized = resize(np.asarray(image, dtype=np.float32), input_size, order=1)
    return Tensor(resized[None, None])


def prepare_example(sample, input_size, loss_config):
    mask = resize(np.asarray(sample.mask, dtype=bool), input_size, order=0)
    weight_map = None
    if loss_config.omega0 > 0:
        weight_map = boundary_weight_map(
            mask, loss_config.omega0, loss_config.sigma, loss_config.weight_map
        )
    height, width = sample.image.shape
    return {
        "id": sample.id,
        "image": image_tensor(sample.image, input_size),
        "mask": mask,
        "weight_map": weight_map,
        "target": to_vector(normalize_ellipse(sample.ellipse, height, width)),
    }


class HeadDataset:
    """Samples resized to the network input with their loss targets precomputed."""

    def __init__(self, examples):
        self.examples = list(examples)

    @classmethod
    def from_samples(cls, samples, input_size, loss_config, executor=None):
        prepare = partial(prepare_example, input_size=input_size, loss_config=loss_config)
        return cls(map(prepare, samples) if executor is None else executor.map(prepare, samples))

    def __len__(self):
        return len(self.examples)

    def __getitem__(self, index):
        return self.examples[index]

    def __iter__(self):
        return iter(self.examples)

    def ids(self):
        return [e["id"] for e in self.examples]
