import itertools
import numpy as np
import threading
from collections import namedtuple
from contextlib import contextmanager

_node_ids = itertools.count()
_state = threading.local()
_default_dtype = np.float32

TapeRecord = namedtuple("TapeRecord", ["op", "output_id", "inputs", "backward"])


def get_default_dtype():
    return _default_dtype


@contextmanager
def default_dtype(dtype):
    global _default_dtype
    previous = _default_dtype
    _default_dtype = np.dtype(dtype).type
    try:
        yield
    finally:
        _default_dtype = previous


def is_grad_enabled():
    return getattr(_state, "grad_enabled", True)


@contextmanager
def no_grad():
    previous = is_grad_enabled()
    _state.grad_enabled = False
    try:
        yield
    finally:
        _state.grad_enabled = previous


class Tape:
    """Ordered log of executed ops; an op's inputs are always recorded before it."""

    def __init__(self):
        self.records = []
        self._output_ids = set()

    def __len__(self):
        return len(self.records)

    def __contains__(self, node_id):
        return node_id in self._output_ids

    def record(self, op, output, inputs, backward):
        self.records.append(TapeRecord(op, output.node_id, inputs, backward))
        self._output_ids.add(output.node_id)

    def leaves(self):
        seen = set()
        for record in self.records:
            for tensor in record.inputs:
                if (
                    tensor.requires_grad
                    and tensor.node_id not in self._output_ids
                    and tensor.node_id not in seen
                ):
                    seen.add(tensor.node_id)
                    yield tensor

    def clear(self):
        self.records = []
        self._output_ids = set()


def current_tape():
    if not hasattr(_state, "tape"):
        _state.tape = Tape()
    return _state.tape


class Tensor:
    def __init__(self, values, requires_grad=False):
        self.values = np.array(values, dtype=_default_dtype)
        self.values.flags.writeable = False
        self.requires_grad = requires_grad
        self.grad = None
        self.node_id = next(_node_ids)

    def __repr__(self):
        return f"Tensor(dims={self.dims}, requires_grad={self.requires_grad})"

    @property
    def dims(self):
        return list(self.values.shape)

    @property
    def shape(self):
        return self.values.shape

    def item(self):
        if self.values.size != 1:
            raise ValueError(f"Only single-element tensors convert to scalars, got {self.dims}")
        return float(self.values.reshape(()))

    def numpy(self):
        return self.values.copy()

    def detach(self):
        return Tensor(self.values)


def apply_op(op, values, inputs, backward):
    """Wrap the result of a forward computation and record it for the backward pass.

    `backward` receives the output gradient and returns one gradient (or None) per input.
    """
    values = np.asarray(values)
    if not np.all(np.isfinite(values)):
        raise FloatingPointError(f"{op} produced non-finite values")
    out = Tensor(values)
    if is_grad_enabled() and any(t.requires_grad for t in inputs):
        out.requires_grad = True
        current_tape().record(op, out, inputs, backward)
    return out


def backward(loss):
    if loss.values.size != 1:
        raise ValueError(f"backward requires a scalar loss, got dims {loss.dims}")
    tape = current_tape()
    if loss.node_id not in tape:
        raise RuntimeError(
            "No recorded forward pass leads to this loss; "
            "the tape was already consumed by a previous backward call"
        )
    grads = {loss.node_id: np.ones_like(loss.values)}
    for record in reversed(tape.records):
        grad = grads.pop(record.output_id, None)
        if grad is None:
            continue
        for tensor, input_grad in zip(record.inputs, record.backward(grad)):
            if input_grad is None or not tensor.requires_grad:
                continue
            if tensor.node_id in grads:
                grads[tensor.node_id] = grads[tensor.node_id] + input_grad
            else:
                grads[tensor.node_id] = input_grad
    leaves = list(tape.leaves())
    for leaf in leaves:
        grad = grads.get(leaf.node_id)
        leaf.grad = (
            np.zeros_like(leaf.values) if grad is None else np.asarray(grad, leaf.values.dtype)
        )
    tape.clear()
    return {leaf.node_id: leaf.grad for leaf in leaves}
