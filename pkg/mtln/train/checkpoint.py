import json
import numpy as np
import struct
from collections import namedtuple

from mtln.train.model import ModelParams
from mtln.train.model import NetworkConfig
from mtln.train.model import parameter_shapes
from mtln.train.tensor import Tensor

MAGIC = b"MTLN"
VERSION = 1
VELOCITY_PREFIX = "vel/"

Checkpoint = namedtuple("Checkpoint", ["config", "epoch", "params", "velocity"])


class CheckpointError(ValueError):
    pass


def _encode_tensors(tensors, prefix=""):
    chunks = [struct.pack("<I", len(tensors))]
    for name, values in tensors.items():
        encoded = f"{prefix}{name}".encode("utf-8")
        values = np.asarray(values, dtype="<f4")
        chunks.append(struct.pack("<H", len(encoded)) + encoded)
        chunks.append(struct.pack("<B", values.ndim))
        chunks.append(struct.pack(f"<{values.ndim}I", *values.shape))
        chunks.append(values.tobytes(order="C"))
    return b"".join(chunks)


def encode_checkpoint(checkpoint):
    header = json.dumps(
        {"config": checkpoint.config, "epoch": checkpoint.epoch}, sort_keys=True
    ).encode("utf-8")
    return b"".join(
        [
            MAGIC,
            struct.pack("<I", VERSION),
            struct.pack("<I", len(header)),
            header,
            _encode_tensors(checkpoint.params),
            _encode_tensors(checkpoint.velocity, prefix=VELOCITY_PREFIX),
        ]
    )


class _Reader:
    def __init__(self, data):
        self.data = data
        self.pos = 0

    def read(self, size):
        if self.pos + size > len(self.data):
            raise CheckpointError(
                f"Checkpoint is truncated: needed {size} bytes at offset {self.pos}, "
                f"only {len(self.data) - self.pos} left"
            )
        chunk = self.data[self.pos : self.pos + size]
        self.pos += size
        return chunk

    def unpack(self, fmt):
        return struct.unpack(fmt, self.read(struct.calcsize(fmt)))


def _decode_tensors(reader, prefix=""):
    (count,) = reader.unpack("<I")
    tensors = {}
    for _ in range(count):
        (name_length,) = reader.unpack("<H")
        name = reader.read(name_length).decode("utf-8")
        if not name.startswith(prefix):
            raise CheckpointError(f"Expected a tensor name starting with '{prefix}', got '{name}'")
        (ndim,) = reader.unpack("<B")
        shape = reader.unpack(f"<{ndim}I")
        size = int(np.prod(shape, dtype=np.int64))
        values = np.frombuffer(reader.read(4 * size), dtype="<f4").reshape(shape)
        tensors[name[len(prefix) :]] = values.astype(np.float32)
    return tensors


def decode_checkpoint(data):
    reader = _Reader(data)
    magic = reader.read(len(MAGIC))
    if magic != MAGIC:
        raise CheckpointError(f"Not a checkpoint file, bad magic {magic!r}")
    (version,) = reader.unpack("<I")
    if version != VERSION:
        raise CheckpointError(f"Unsupported checkpoint version {version}, expected {VERSION}")
    (header_length,) = reader.unpack("<I")
    try:
        header = json.loads(reader.read(header_length).decode("utf-8"))
    except (UnicodeDecodeError, json.JSONDecodeError) as e:
        raise CheckpointError(f"Corrupt checkpoint header: {e}") from e
    params = _decode_tensors(reader)
    velocity = _decode_tensors(reader, prefix=VELOCITY_PREFIX)
    if reader.pos != len(data):
        raise CheckpointError(f"Checkpoint has {len(data) - reader.pos} trailing bytes")
    return Checkpoint(header["config"], header["epoch"], params, velocity)


def save_checkpoint(path, checkpoint):
    with open(path, "wb") as f:
        f.write(encode_checkpoint(checkpoint))


def load_checkpoint(path):
    with open(path, "rb") as f:
        return decode_checkpoint(f.read())


def make_checkpoint(config, epoch, params, velocity):
    return Checkpoint(
        config,
        epoch,
        {name: t.values if isinstance(t, Tensor) else t for name, t in params.items()},
        dict(velocity),
    )


def restore_params(checkpoint):
    config = checkpoint.config
    network = NetworkConfig.from_config(config["network"], seed=config["seed"])
    tensors = {
        name: Tensor(values, requires_grad=True) for name, values in checkpoint.params.items()
    }
    params = ModelParams(network, tensors)
    expected = parameter_shapes(network)
    if expected.keys() != tensors.keys() or any(
        tensors[name].shape != tuple(shape) for name, shape in expected.items()
    ):
        raise CheckpointError("Checkpoint tensors do not match the network configuration")
    return params
