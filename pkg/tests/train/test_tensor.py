import numpy as np
import pytest

from mtln.train import functional as F
from mtln.train.tensor import Tensor
from mtln.train.tensor import backward
from mtln.train.tensor import current_tape
from mtln.train.tensor import default_dtype
from mtln.train.tensor import get_default_dtype
from mtln.train.tensor import no_grad


def test_tensor_is_immutable():
    t = Tensor([[1.0, 2.0]])
    assert t.dims == [1, 2]
    assert t.values.dtype == np.float32
    with pytest.raises(ValueError):
        t.values[0, 0] = 3.0


def test_default_dtype():
    with default_dtype(np.float64):
        assert get_default_dtype() is np.float64
        assert Tensor([1.0]).values.dtype == np.float64
    assert get_default_dtype() is np.float32


def test_backward_sum_of_squares():
    x = Tensor([1.0, -2.0, 3.0], requires_grad=True)
    grads = backward(F.sum(F.square(x)))
    assert np.allclose(x.grad, [2.0, -4.0, 6.0])
    assert np.allclose(grads[x.node_id], x.grad)


def test_backward_two_leaves():
    x = Tensor([1.0, 2.0], requires_grad=True)
    y = Tensor([3.0, 5.0], requires_grad=True)
    backward(F.sum(F.mul(x, y)))
    assert np.allclose(x.grad, [3.0, 5.0])
    assert np.allclose(y.grad, [1.0, 2.0])


def test_backward_accumulates_reused_inputs():
    x = Tensor([2.0], requires_grad=True)
    backward(F.sum(F.add(F.mul(x, x), x)))
    assert np.allclose(x.grad, [5.0])


def test_backward_untouched_leaf_gets_zero_gradient():
    x = Tensor([1.0, 2.0], requires_grad=True)
    y = Tensor([3.0, 4.0], requires_grad=True)
    z = F.sum(x)
    F.sum(y)
    backward(z)
    assert np.allclose(x.grad, 1.0)
    assert np.array_equal(y.grad, np.zeros(2))


def test_backward_requires_scalar():
    x = Tensor([1.0, 2.0], requires_grad=True)
    with pytest.raises(ValueError):
        backward(F.square(x))


def test_backward_rejects_consumed_tape():
    x = Tensor([1.0, 2.0], requires_grad=True)
    loss = F.sum(F.square(x))
    backward(loss)
    assert len(current_tape()) == 0
    with pytest.raises(RuntimeError):
        backward(loss)


def test_no_grad_does_not_record():
    x = Tensor([1.0, 2.0], requires_grad=True)
    with no_grad():
        y = F.sum(F.square(x))
    assert not y.requires_grad
    assert len(current_tape()) == 0


def test_non_finite_values_raise():
    x = Tensor([0.0, 1.0])
    with pytest.raises(FloatingPointError):
        with np.errstate(divide="ignore"):
            F.log(x)


def test_forward_backward_deterministic():
    def run():
        rng = np.random.default_rng(7)
        x = Tensor(rng.standard_normal((1, 2, 8, 8)), requires_grad=True)
        k = Tensor(rng.standard_normal((3, 2, 3, 3)), requires_grad=True)
        b = Tensor(np.zeros(3), requires_grad=True)
        out = F.sum(F.relu(F.conv2d(x, k, b, stride=2)))
        backward(out)
        return out.values, x.grad, k.grad

    for first, second in zip(run(), run()):
        assert np.array_equal(first, second)
