import math
import numpy as np
from collections.abc import Mapping

from mtln.train import functional as F
from mtln.train.model.decoder_block import decoder_block
from mtln.train.model.decoder_block import decoder_block_shapes
from mtln.train.model.ellipse_tuner import NUM_ELLIPSE_PARAMS
from mtln.train.model.ellipse_tuner import ellipse_tuner
from mtln.train.model.ellipse_tuner import ellipse_tuner_shapes
from mtln.train.model.res_block import res_block
from mtln.train.model.res_block import res_block_shapes
from mtln.train.tensor import Tensor

# Encoder stage index -> number of 2x average-poolings of the input concatenated onto its input.
SCALE_INJECTIONS = {1: 1, 2: 2}


class NetworkConfig:
    def __init__(
        self,
        input_size=(128, 128),
        widths=(8, 16, 32, 64),
        fc_sizes=(128, 64),
        num_stages=None,
        seed=0,
    ):
        self.input_size = tuple(int(s) for s in input_size)
        self.widths = tuple(int(w) for w in widths)
        self.fc_sizes = tuple(int(s) for s in fc_sizes)
        self.num_stages = len(self.widths) if num_stages is None else int(num_stages)
        self.seed = int(seed)

        if self.num_stages < 1 or len(self.widths) != self.num_stages:
            raise ValueError(
                f"Expected one encoder width per stage, got {len(self.widths)} widths "
                f"for {self.num_stages} stages"
            )
        if any(w < 1 for w in self.widths + self.fc_sizes):
            raise ValueError("Channel widths and FC sizes must be positive")
        factor = 2**self.num_stages
        if any(s % factor for s in self.input_size):
            raise ValueError(
                f"Input size {self.input_size} must be divisible by 2^{self.num_stages}={factor}"
            )

    def __eq__(self, other):
        return isinstance(other, NetworkConfig) and vars(self) == vars(other)

    def __repr__(self):
        return f"NetworkConfig({vars(self)})"

    @staticmethod
    def get_args(config):
        return {
            "input_size": (config["input_height"], config["input_width"]),
            "widths": config["widths"],
            "fc_sizes": config["fc_sizes"],
            "num_stages": config["num_stages"],
        }

    @classmethod
    def from_config(cls, config, seed=0):
        return cls(**cls.get_args(config), seed=seed)

    def stage_in_channels(self, stage):
        channels = 1 if stage == 0 else self.widths[stage - 1]
        return channels + (1 if stage in SCALE_INJECTIONS else 0)


class ModelParams(Mapping):
    """Named parameter tensors of an MTLN together with the config they were built for."""

    def __init__(self, config, tensors):
        self.config = config
        self.tensors = dict(tensors)

    def __getitem__(self, name):
        return self.tensors[name]

    def __iter__(self):
        return iter(self.tensors)

    def __len__(self):
        return len(self.tensors)

    def scope(self, prefix):
        prefix = f"{prefix}."
        return {k[len(prefix) :]: v for k, v in self.tensors.items() if k.startswith(prefix)}

    def num_parameters(self):
        return sum(t.values.size for t in self.tensors.values())

    def replace(self, tensors):
        if set(tensors) != set(self.tensors):
            raise ValueError("Replacement tensors must have the same parameter names")
        return ModelParams(self.config, {name: tensors[name] for name in self.tensors})

    def numpy(self):
        return {name: t.values for name, t in self.tensors.items()}


def parameter_shapes(config):
    shapes = {}

    def add(prefix, block_shapes):
        shapes.update({f"{prefix}.{k}": v for k, v in block_shapes.items()})

    for stage in range(config.num_stages):
        add(
            f"encoder.{stage}",
            res_block_shapes(config.stage_in_channels(stage), config.widths[stage], stride=2),
        )
    for stage in range(config.num_stages - 1):
        add(
            f"decoder.{stage}",
            decoder_block_shapes(
                config.widths[stage + 1], config.widths[stage], config.widths[stage]
            ),
        )
    add("decoder.out", decoder_block_shapes(config.widths[0], 1, config.widths[0]))
    add("head", {"kernel": (1, config.widths[0], 1, 1), "bias": (1,)})
    add(
        "ellipse_tuner",
        ellipse_tuner_shapes(F.NUM_MOMENTS * config.widths[-1], config.fc_sizes),
    )
    return shapes


def init_parameter(rng, name, shape):
    if name.endswith(".bias"):
        return np.zeros(shape)
    fan_in = math.prod(shape[1:])
    bound = math.sqrt(6 / fan_in)
    return rng.uniform(-bound, bound, size=shape)


def build_mtln(config):
    rng = np.random.default_rng(config.seed)
    return ModelParams(
        config,
        {
            name: Tensor(init_parameter(rng, name, shape), requires_grad=True)
            for name, shape in parameter_shapes(config).items()
        },
    )


def forward_mtln(params, image):
    config = params.config
    expected = (1, 1, *config.input_size)
    if image.shape != expected:
        raise ValueError(f"Expected an image of dims {list(expected)}, got {image.dims}")

    scales = [image]
    for _ in range(max(SCALE_INJECTIONS.get(s, 0) for s in range(config.num_stages))):
        scales.append(F.avg_pool2(scales[-1]))

    x = image
    skips = []
    for stage in range(config.num_stages):
        if stage in SCALE_INJECTIONS:
            x = F.concat_channels(x, scales[SCALE_INJECTIONS[stage]])
        x = res_block(x, params.scope(f"encoder.{stage}"), stride=2)
        skips.append(x)

    y = skips[-1]
    for stage in reversed(range(config.num_stages - 1)):
        y = decoder_block(y, skips[stage], params.scope(f"decoder.{stage}"))
    y = decoder_block(y, image, params.scope("decoder.out"))
    seg_logits = F.conv2d(y, params["head.kernel"], params["head.bias"])

    ellipse_pred = ellipse_tuner(
        F.moment_pool(skips[-1]),
        params.scope("ellipse_tuner"),
        num_layers=len(config.fc_sizes) + 1,
    )
    if ellipse_pred.shape != (NUM_ELLIPSE_PARAMS,):
        raise ValueError(f"Ellipse Tuner produced dims {ellipse_pred.dims}")
    return seg_logits, ellipse_pred
