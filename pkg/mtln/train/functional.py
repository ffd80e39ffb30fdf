import numpy as np
from numpy.lib.stride_tricks import sliding_window_view
from scipy.special import expit

from mtln.train.tensor import Tensor
from mtln.train.tensor import apply_op


def _constant(x, like):
    if isinstance(x, Tensor):
        return x
    if np.ndim(x) == 0:
        return Tensor(np.full(like.shape, x))
    return Tensor(x)


def _check_same_dims(op, x, y):
    if x.shape != y.shape:
        raise ValueError(f"{op} requires matching dims, got {x.dims} and {y.dims}")


def conv_output_size(size, kernel_size, stride, padding):
    pad = (kernel_size - 1) // 2 if padding == "same" else 0
    return (size + 2 * pad - kernel_size) // stride + 1


def conv2d(input, kernel, bias, stride=1, padding="same"):
    """Direct 2D cross-correlation of an NCHW input with an OIKK kernel."""
    n, c, h, w = input.shape
    out_channels, in_channels, k, k_w = kernel.shape
    if c != in_channels:
        raise ValueError(f"conv2d expected {in_channels} input channels, got {c}")
    if k != k_w or k % 2 == 0:
        raise ValueError(f"conv2d kernels must be square with odd size, got {k}x{k_w}")
    if stride not in (1, 2):
        raise ValueError(f"conv2d stride must be 1 or 2, got {stride}")
    if padding not in ("same", "valid"):
        raise ValueError(f"conv2d padding must be 'same' or 'valid', got {padding}")
    if bias.shape != (out_channels,):
        raise ValueError(f"conv2d bias must have dims [{out_channels}], got {bias.dims}")
    pad = (k - 1) // 2 if padding == "same" else 0
    x = input.values
    if pad:
        x = np.pad(x, ((0, 0), (0, 0), (pad, pad), (pad, pad)))
    windows = sliding_window_view(x, (k, k), axis=(2, 3))[:, :, ::stride, ::stride]
    out_h, out_w = windows.shape[2], windows.shape[3]
    weights = kernel.values
    out = np.tensordot(windows, weights, axes=([1, 4, 5], [1, 2, 3])).transpose(0, 3, 1, 2)
    out = out + bias.values[None, :, None, None]

    def backward(grad):
        grad_kernel = np.tensordot(grad, windows, axes=([0, 2, 3], [0, 2, 3]))
        grad_bias = grad.sum(axis=(0, 2, 3))
        grad_cols = np.tensordot(grad, weights, axes=([1], [0]))
        grad_x = np.zeros(x.shape, dtype=grad_cols.dtype)
        for i in range(k):
            for j in range(k):
                grad_x[
                    :, :, i : i + stride * out_h : stride, j : j + stride * out_w : stride
                ] += grad_cols[..., i, j].transpose(0, 3, 1, 2)
        return grad_x[:, :, pad : pad + h, pad : pad + w], grad_kernel, grad_bias

    return apply_op("conv2d", out, (input, kernel, bias), backward)


def _blocks(x):
    n, c, h, w = x.shape
    return x.reshape(n, c, h // 2, 2, w // 2, 2).transpose(0, 1, 2, 4, 3, 5).reshape(
        n, c, h // 2, w // 2, 4
    )


def _unblocks(blocks):
    n, c, h, w, _ = blocks.shape
    blocks = blocks.reshape(n, c, h, w, 2, 2).transpose(0, 1, 2, 4, 3, 5)
    return blocks.reshape(n, c, 2 * h, 2 * w)


def _check_even(op, input):
    if input.shape[2] % 2 or input.shape[3] % 2:
        raise ValueError(f"{op} requires even spatial dims, got {input.dims}")


def max_pool2(input):
    _check_even("max_pool2", input)
    blocks = _blocks(input.values)
    # argmax returns the first maximum in row-major block order.
    index = blocks.argmax(axis=-1)[..., None]
    out = np.take_along_axis(blocks, index, axis=-1)[..., 0]

    def backward(grad):
        grad_blocks = np.zeros(blocks.shape, dtype=grad.dtype)
        np.put_along_axis(grad_blocks, index, grad[..., None], axis=-1)
        return (_unblocks(grad_blocks),)

    return apply_op("max_pool2", out, (input,), backward)


def avg_pool2(input):
    _check_even("avg_pool2", input)
    out = _blocks(input.values).mean(axis=-1)

    def backward(grad):
        return (upsample_values(grad) / 4,)

    return apply_op("avg_pool2", out, (input,), backward)


def upsample_values(x):
    return x.repeat(2, axis=2).repeat(2, axis=3)


def upsample2_nearest(input):
    def backward(grad):
        return (_blocks(grad).sum(axis=-1),)

    return apply_op("upsample2_nearest", upsample_values(input.values), (input,), backward)


def concat_channels(a, b):
    if a.shape[0] != b.shape[0] or a.shape[2:] != b.shape[2:]:
        raise ValueError(f"concat_channels requires matching N, H, W, got {a.dims} and {b.dims}")
    split = a.shape[1]

    def backward(grad):
        return grad[:, :split], grad[:, split:]

    return apply_op(
        "concat_channels", np.concatenate([a.values, b.values], axis=1), (a, b), backward
    )


def global_avg_pool(input):
    n, c, h, w = input.shape
    if n != 1:
        raise ValueError(f"global_avg_pool expects a single image, got batch size {n}")

    def backward(grad):
        return (np.broadcast_to(grad[None, :, None, None] / (h * w), input.shape),)

    return apply_op("global_avg_pool", input.values.mean(axis=(0, 2, 3)), (input,), backward)


NUM_MOMENTS = 6


def coordinate_grid(height, width):
    """x, y, x^2, y^2 and xy at pixel centres, with both axes spanning [-1, 1]."""
    ys = (np.arange(height) + 0.5) / height * 2 - 1
    xs = (np.arange(width) + 0.5) / width * 2 - 1
    x, y = np.meshgrid(xs, ys)
    return np.stack([x, y, x * x, y * y, x * y])


def moment_pool(input, eps=1e-2):
    """Per-channel mean activation followed by the channel's normalized coordinate moments.

    The output vector holds the C means first, then C values for each moment of
    coordinate_grid, so its length is NUM_MOMENTS * C.
    """
    n, c, h, w = input.shape
    if n != 1:
        raise ValueError(f"moment_pool expects a single image, got batch size {n}")
    f = input.values[0]
    grid = coordinate_grid(h, w).astype(f.dtype)
    mass = f.mean(axis=(1, 2))
    denom = mass + eps
    moments = np.tensordot(f, grid, axes=([1, 2], [1, 2])) / (h * w) / denom[:, None]

    def backward(grad):
        coeff = grad[c:].reshape(NUM_MOMENTS - 1, c).T / denom[:, None]
        grad_f = np.tensordot(coeff, grid, axes=([1], [0]))
        grad_f += (grad[:c] - (coeff * moments).sum(axis=1))[:, None, None]
        return ((grad_f / (h * w))[None],)

    return apply_op("moment_pool", np.concatenate([mass, moments.T.ravel()]), (input,), backward)


def fully_connected(x, weights, bias):
    if x.values.ndim != 1 or weights.values.ndim != 2 or weights.shape[1] != x.shape[0]:
        raise ValueError(
            f"fully_connected expects a vector and a matrix with matching inner dims, "
            f"got {x.dims} and {weights.dims}"
        )
    if bias.shape != (weights.shape[0],):
        raise ValueError(
            f"fully_connected bias must have dims [{weights.shape[0]}], got {bias.dims}"
        )

    def backward(grad):
        return weights.values.T @ grad, np.outer(grad, x.values), grad

    return apply_op(
        "fully_connected", weights.values @ x.values + bias.values, (x, weights, bias), backward
    )


def relu(x):
    def backward(grad):
        return (grad * (x.values > 0),)

    return apply_op("relu", np.maximum(x.values, 0), (x,), backward)


def sigmoid(x):
    s = expit(x.values)

    def backward(grad):
        return (grad * s * (1 - s),)

    return apply_op("sigmoid", s, (x,), backward)


def add(x, y):
    y = _constant(y, x)
    _check_same_dims("add", x, y)
    return apply_op("add", x.values + y.values, (x, y), lambda grad: (grad, grad))


def sub(x, y):
    y = _constant(y, x)
    _check_same_dims("sub", x, y)
    return apply_op("sub", x.values - y.values, (x, y), lambda grad: (grad, -grad))


def mul(x, y):
    y = _constant(y, x)
    _check_same_dims("mul", x, y)

    def backward(grad):
        return grad * y.values, grad * x.values

    return apply_op("mul", x.values * y.values, (x, y), backward)


def divide(x, y):
    y = _constant(y, x)
    _check_same_dims("divide", x, y)

    def backward(grad):
        return grad / y.values, -grad * x.values / y.values**2

    return apply_op("divide", x.values / y.values, (x, y), backward)


def scale(x, factor):
    return apply_op("scale", x.values * factor, (x,), lambda grad: (grad * factor,))


def elementwise(op, x, y=None):
    if op == "relu":
        return relu(x)
    if op == "sigmoid":
        return sigmoid(x)
    if op == "add":
        if y is None:
            raise ValueError("elementwise add needs a second operand")
        return add(x, y)
    raise ValueError(f"Unknown elementwise op {op}")


def log(x):
    return apply_op("log", np.log(x.values), (x,), lambda grad: (grad / x.values,))


def clamp(x, low, high):
    def backward(grad):
        return (grad * ((x.values >= low) & (x.values <= high)),)

    return apply_op("clamp", np.clip(x.values, low, high), (x,), backward)


def square(x):
    return apply_op("square", x.values**2, (x,), lambda grad: (2 * grad * x.values,))


def sum(x):
    def backward(grad):
        return (np.broadcast_to(grad, x.shape),)

    return apply_op("sum", x.values.sum(), (x,), backward)


def mean(x):
    size = x.values.size

    def backward(grad):
        return (np.broadcast_to(grad / size, x.shape),)

    return apply_op("mean", x.values.mean(), (x,), backward)


def reshape(x, shape):
    def backward(grad):
        return (grad.reshape(x.shape),)

    return apply_op("reshape", x.values.reshape(shape), (x,), backward)
