import numpy as np
import pytest

from mtln.train import functional as F
from mtln.train.tensor import Tensor
from mtln.train.tensor import backward


def test_conv2d_identity_kernel():
    kernel = np.zeros((1, 1, 3, 3))
    kernel[0, 0, 1, 1] = 1.0
    x = Tensor(np.ones((1, 1, 3, 3)))
    out = F.conv2d(x, Tensor(kernel), Tensor(np.zeros(1)))
    assert np.array_equal(out.values, x.values)


def test_conv2d_scaling_kernel():
    x = Tensor([[[[1.0, 2.0], [3.0, 4.0]]]])
    out = F.conv2d(x, Tensor(np.full((1, 1, 1, 1), 2.0)), Tensor(np.zeros(1)))
    assert np.array_equal(out.values[0, 0], [[2.0, 4.0], [6.0, 8.0]])


def test_conv2d_neighbourhood_sum():
    x = np.random.default_rng(3).standard_normal((1, 1, 4, 4))
    out = F.conv2d(Tensor(x), Tensor(np.ones((1, 1, 3, 3))), Tensor(np.zeros(1)))
    padded = np.pad(x[0, 0], 1)
    for i in range(4):
        for j in range(4):
            assert np.isclose(out.values[0, 0, i, j], padded[i : i + 3, j : j + 3].sum(), atol=1e-5)


def test_conv2d_output_size():
    for size in [8, 16, 30]:
        for stride in [1, 2]:
            for padding, k in [("same", 3), ("valid", 3), ("same", 1)]:
                x = Tensor(np.zeros((1, 1, size, size)))
                kernel = Tensor(np.zeros((2, 1, k, k)))
                out = F.conv2d(x, kernel, Tensor(np.zeros(2)), stride=stride, padding=padding)
                expected = F.conv_output_size(size, k, stride, padding)
                assert out.dims == [1, 2, expected, expected]


def test_conv2d_rejects_bad_arguments():
    x = Tensor(np.zeros((1, 2, 4, 4)))
    with pytest.raises(ValueError):
        F.conv2d(x, Tensor(np.zeros((1, 3, 3, 3))), Tensor(np.zeros(1)))
    with pytest.raises(ValueError):
        F.conv2d(x, Tensor(np.zeros((1, 2, 2, 2))), Tensor(np.zeros(1)))
    with pytest.raises(ValueError):
        F.conv2d(x, Tensor(np.zeros((1, 2, 3, 3))), Tensor(np.zeros(1)), stride=3)


def test_max_pool_tie_goes_to_first_element():
    x = Tensor(np.ones((1, 1, 2, 2)), requires_grad=True)
    backward(F.sum(F.max_pool2(x)))
    assert np.array_equal(x.grad[0, 0], [[1.0, 0.0], [0.0, 0.0]])


def test_pooling_rejects_odd_dims():
    with pytest.raises(ValueError):
        F.max_pool2(Tensor(np.zeros((1, 1, 3, 4))))
    with pytest.raises(ValueError):
        F.avg_pool2(Tensor(np.zeros((1, 1, 4, 5))))


def test_concat_channels():
    a = Tensor(np.zeros((1, 2, 4, 4)))
    b = Tensor(np.ones((1, 3, 4, 4)))
    out = F.concat_channels(a, b)
    assert out.dims == [1, 5, 4, 4]
    assert out.values[0, 2:].all() and not out.values[0, :2].any()
    with pytest.raises(ValueError):
        F.concat_channels(a, Tensor(np.zeros((1, 1, 2, 2))))


def test_fully_connected():
    x = Tensor([1.0, 2.0, 3.0])
    w = Tensor([[1.0, 1.0, 1.0], [1.0, 2.0, 3.0]])
    b = Tensor([0.0, 1.0])
    assert np.allclose(F.fully_connected(x, w, b).values, [6.0, 15.0])
    with pytest.raises(ValueError):
        F.fully_connected(Tensor([1.0, 2.0]), w, b)


def test_relu_gradient_at_zero():
    x = Tensor([-1.0, 0.0, 2.0], requires_grad=True)
    backward(F.sum(F.relu(x)))
    assert np.array_equal(x.grad, [0.0, 0.0, 1.0])


def test_elementwise():
    x = Tensor([-1.0, 0.0, 2.0])
    assert np.array_equal(F.elementwise("relu", x).values, [0.0, 0.0, 2.0])
    assert np.allclose(F.elementwise("sigmoid", x).values[1], 0.5)
    assert np.array_equal(F.elementwise("add", x, x).values, [-2.0, 0.0, 4.0])
    with pytest.raises(ValueError):
        F.elementwise("tanh", x)
    with pytest.raises(ValueError):
        F.add(x, Tensor([1.0, 2.0]))


def test_max_pool():
    x = Tensor([[[[1.0, 2.0], [3.0, 4.0]]]])
    assert np.array_equal(F.max_pool2(x).values, [[[[4.0]]]])
    constant = Tensor(np.full((1, 2, 4, 6), 0.5))
    pooled = F.max_pool2(constant)
    assert pooled.dims == [1, 2, 2, 3]
    assert np.array_equal(pooled.values, np.full((1, 2, 2, 3), 0.5))
    assert np.array_equal(F.upsample2_nearest(pooled).values, constant.values)


def test_max_pool_gradient_at_argmax():
    x = Tensor([[[[1.0, 5.0, 0.0, 0.0], [3.0, 4.0, 0.0, 2.0]]]], requires_grad=True)
    backward(F.sum(F.max_pool2(x)))
    assert np.array_equal(x.grad[0, 0], [[0.0, 1.0, 0.0, 0.0], [0.0, 0.0, 0.0, 1.0]])


def test_upsample():
    x = Tensor([[[[1.0]]]], requires_grad=True)
    out = F.upsample2_nearest(x)
    assert np.array_equal(out.values, [[[[1.0, 1.0], [1.0, 1.0]]]])
    backward(F.sum(out))
    assert np.array_equal(x.grad, [[[[4.0]]]])


def test_concat_channels_slices_back():
    rng = np.random.default_rng(0)
    a = rng.standard_normal((1, 3, 8, 8))
    b = rng.standard_normal((1, 1, 8, 8))
    out = F.concat_channels(Tensor(a), Tensor(b)).values
    assert out.shape == (1, 4, 8, 8)
    assert np.array_equal(out[:, :3], a.astype(np.float32))
    assert np.array_equal(out[:, 3:], b.astype(np.float32))
    with pytest.raises(ValueError):
        F.concat_channels(Tensor(np.zeros((1, 1, 8, 8))), Tensor(np.zeros((1, 1, 7, 8))))


def test_fully_connected_identity_and_zero_weights():
    x = Tensor([1.0, -2.0])
    identity = F.fully_connected(x, Tensor(np.eye(2)), Tensor(np.zeros(2)))
    assert np.array_equal(identity.values, x.values)
    zero = F.fully_connected(x, Tensor(np.zeros((2, 2))), Tensor([1.0, 2.0]))
    assert np.array_equal(zero.values, [1.0, 2.0])
    product = F.fully_connected(
        Tensor(np.ones(3)), Tensor([[1.0, 2.0, 3.0], [4.0, 5.0, 6.0]]), Tensor(np.zeros(2))
    )
    assert np.array_equal(product.values, [6.0, 15.0])


def test_sigmoid_derivative_at_zero():
    x = Tensor([0.0], requires_grad=True)
    out = F.sigmoid(x)
    backward(F.sum(out))
    assert np.allclose(out.values, 0.5)
    assert np.allclose(x.grad, 0.25)


def test_add_zero():
    x = Tensor([-1.0, 0.5, 2.0])
    assert np.array_equal(F.add(x, Tensor(np.zeros(3))).values, x.values)


def test_moment_pool_locates_a_single_pixel():
    x = np.zeros((1, 1, 4, 4))
    x[0, 0, 1, 3] = 1.0
    out = F.moment_pool(Tensor(x), eps=0.0).values
    assert np.allclose(out, [1 / 16, 0.75, -0.25, 0.5625, 0.0625, -0.1875])


def test_moment_pool_sees_translation():
    x = np.zeros((1, 2, 8, 8))
    x[0, :, 2:4, 1:4] = 1.0
    shifted = np.roll(x, (3, 2), axis=(2, 3))
    out, out_shifted = F.moment_pool(Tensor(x)).values, F.moment_pool(Tensor(shifted)).values
    assert np.allclose(out[:2], out_shifted[:2])
    assert np.all(out_shifted[2:6] > out[2:6])
    with pytest.raises(ValueError):
        F.moment_pool(Tensor(np.zeros((2, 1, 4, 4))))
