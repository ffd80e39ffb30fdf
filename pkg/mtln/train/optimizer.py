import numpy as np

from mtln.train.tensor import Tensor


def zero_velocity(params):
    return {name: np.zeros_like(t.values) for name, t in params.items()}


def _check_names(params, other, what):
    if set(params) != set(other):
        missing = sorted(set(params) - set(other))
        extra = sorted(set(other) - set(params))
        raise ValueError(f"{what} do not match parameters: missing {missing}, unexpected {extra}")


def sgd_momentum_step(params, grads, velocity, lr, momentum):
    """One SGD step with heavy-ball momentum: v <- momentum * v - lr * g, p <- p + v.

    Returns new parameter leaves and the new velocity; the inputs are left untouched.
    """
    _check_names(params, grads, "Gradients")
    _check_names(params, velocity, "Velocity buffers")
    new_velocity = {}
    new_tensors = {}
    for name, tensor in params.items():
        dtype = tensor.values.dtype
        v = momentum * velocity[name] - lr * np.asarray(grads[name], dtype=dtype)
        new_velocity[name] = v.astype(dtype)
        new_tensors[name] = Tensor(tensor.values + new_velocity[name], requires_grad=True)
    if hasattr(params, "replace"):
        return params.replace(new_tensors), new_velocity
    return new_tensors, new_velocity


class SGDMomentum:
    def __init__(self, lr, momentum, velocity=None):
        if lr <= 0:
            raise ValueError(f"Learning rate must be positive, got {lr}")
        if not 0 <= momentum < 1:
            raise ValueError(f"Momentum must lie in [0, 1), got {momentum}")
        self.lr = lr
        self.momentum = momentum
        self.velocity = velocity

    def step(self, params, grads):
        if self.velocity is None:
            self.velocity = zero_velocity(params)
        params, self.velocity = sgd_momentum_step(
            params, grads, self.velocity, self.lr, self.momentum
        )
        return params
