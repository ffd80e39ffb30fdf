import numpy as np
import pytest

from mtln.train import functional as F
from mtln.train.loss import LossConfig
from mtln.train.loss import compute_losses
from mtln.train.model import ModelParams
from mtln.train.model import NetworkConfig
from mtln.train.model import build_mtln
from mtln.train.model import forward_mtln
from mtln.train.model import parameter_shapes
from mtln.train.model.decoder_block import decoder_block
from mtln.train.model.decoder_block import decoder_block_shapes
from mtln.train.model.res_block import res_block
from mtln.train.model.res_block import res_block_shapes
from mtln.train.tensor import Tensor
from mtln.train.tensor import backward
from mtln.train.tensor import no_grad
from tests.train.gradcheck import gradients


def random_image(config, seed=0):
    rng = np.random.default_rng(seed)
    return Tensor(rng.uniform(size=(1, 1, *config.input_size)))


def random_params(shapes, seed=0):
    rng = np.random.default_rng(seed)
    return {
        name: Tensor(rng.standard_normal(shape) * 0.3, requires_grad=True)
        for name, shape in shapes.items()
    }


def test_forward_dims():
    config = NetworkConfig()
    with no_grad():
        seg_logits, ellipse_pred = forward_mtln(build_mtln(config), random_image(config))
    assert seg_logits.dims == [1, 1, 128, 128]
    assert ellipse_pred.dims == [5]


def test_parameter_count():
    params = build_mtln(NetworkConfig())
    assert params.num_parameters() == 184366
    assert build_mtln(NetworkConfig((16, 16), (2, 4), (4, 3))).num_parameters() == 718


def test_build_is_deterministic():
    first = build_mtln(NetworkConfig(seed=5))
    second = build_mtln(NetworkConfig(seed=5))
    other = build_mtln(NetworkConfig(seed=6))
    assert list(first) == list(second)
    for name in first:
        assert np.array_equal(first[name].values, second[name].values)
    name = "encoder.0.conv1.kernel"
    assert not np.array_equal(first[name].values, other[name].values)


def test_scale_injection_channels():
    config = NetworkConfig()
    shapes = parameter_shapes(config)
    assert shapes["encoder.0.conv1.kernel"][1] == 1
    assert shapes["encoder.1.conv1.kernel"][1] == config.widths[0] + 1
    assert shapes["encoder.2.conv1.kernel"][1] == config.widths[1] + 1
    assert shapes["encoder.3.conv1.kernel"][1] == config.widths[2]


def test_ellipse_tuner_reads_bottleneck_moments():
    config = NetworkConfig((16, 16), (2, 4), (4, 3))
    shapes = parameter_shapes(config)
    assert shapes["ellipse_tuner.fc0.weight"] == (4, F.NUM_MOMENTS * 4)
    assert shapes["ellipse_tuner.fc2.weight"] == (5, 3)


def test_every_ellipse_output_depends_on_the_image():
    config = NetworkConfig()
    params = build_mtln(config)
    with no_grad():
        _, first = forward_mtln(params, random_image(config, seed=0))
        _, second = forward_mtln(params, random_image(config, seed=1))
    assert np.all(first.values != second.values)


def test_encoder_weight_reaches_both_heads():
    config = NetworkConfig((16, 16), (2, 4), (4, 3), seed=1)
    params = build_mtln(config)
    image = random_image(config)
    tensors = dict(params.tensors)
    kernel = tensors["encoder.0.conv1.kernel"].values
    tensors["encoder.0.conv1.kernel"] = Tensor(kernel + 0.5)
    with no_grad():
        seg, ellipse = forward_mtln(params, image)
        seg_perturbed, ellipse_perturbed = forward_mtln(ModelParams(config, tensors), image)
    assert not np.allclose(seg.values, seg_perturbed.values)
    assert not np.allclose(ellipse.values, ellipse_perturbed.values)


def test_res_block_identity_with_zero_weights():
    shapes = res_block_shapes(4, 4, 1)
    assert "shortcut.kernel" not in shapes
    params = {name: Tensor(np.zeros(shape)) for name, shape in shapes.items()}
    x = Tensor(np.random.default_rng(0).standard_normal((1, 4, 8, 8)))
    out = res_block(x, params, stride=1)
    assert np.array_equal(out.values, np.maximum(x.values, 0))


def test_res_block_downsamples():
    params = random_params(res_block_shapes(3, 5, 2))
    x = Tensor(np.ones((1, 3, 8, 8)))
    assert res_block(x, params, stride=2).dims == [1, 5, 4, 4]
    with pytest.raises(ValueError):
        res_block(x, params, stride=3)


def test_decoder_block_uses_skip():
    params = random_params(decoder_block_shapes(4, 2, 2))
    x = Tensor(np.random.default_rng(1).standard_normal((1, 4, 4, 4)))
    skip = Tensor(np.random.default_rng(2).standard_normal((1, 2, 8, 8)), requires_grad=True)
    out = decoder_block(x, skip, params)
    assert out.dims == [1, 2, 8, 8]
    backward(F.sum(F.square(out)))
    assert np.abs(skip.grad).sum() > 0
    with no_grad():
        zeroed = decoder_block(x, Tensor(np.zeros((1, 2, 8, 8))), params)
    assert not np.allclose(zeroed.values, out.values)
    with pytest.raises(ValueError):
        decoder_block(x, Tensor(np.zeros((1, 2, 6, 6))), params)


def assert_gradients_close(analytic, numeric):
    for name in analytic:
        a, n = analytic[name], numeric[name]
        assert np.abs(a).sum() > 0, f"no gradient reaches {name}"
        assert np.linalg.norm(a - n) / max(np.linalg.norm(a), np.linalg.norm(n)) < 1e-2


@pytest.mark.parametrize("seed", [0, 1, 2])
def test_res_block_gradients_reach_input(seed):
    rng = np.random.default_rng(seed)
    weights = {k: rng.standard_normal(s) * 0.3 for k, s in res_block_shapes(2, 2, 1).items()}

    def f(t):
        out = res_block(t["x"], {k: Tensor(v) for k, v in weights.items()}, stride=1)
        return F.sum(F.square(out))

    analytic, numeric = gradients(f, {"x": rng.standard_normal((1, 2, 6, 6))})
    assert_gradients_close(analytic, numeric)


@pytest.mark.parametrize("seed", [0, 1, 2])
def test_decoder_block_gradients_reach_both_inputs(seed):
    rng = np.random.default_rng(seed)
    shapes = decoder_block_shapes(3, 2, 2)
    weights = {k: rng.standard_normal(s) * 0.3 for k, s in shapes.items()}

    def f(t):
        out = decoder_block(t["x"], t["skip"], {k: Tensor(v) for k, v in weights.items()})
        return F.sum(F.square(out))

    inputs = {
        "x": rng.standard_normal((1, 3, 3, 3)),
        "skip": rng.standard_normal((1, 2, 6, 6)),
    }
    analytic, numeric = gradients(f, inputs)
    assert_gradients_close(analytic, numeric)


def test_forward_rejects_wrong_dims():
    config = NetworkConfig((16, 16), (2, 4), (4, 3))
    with pytest.raises(ValueError):
        forward_mtln(build_mtln(config), Tensor(np.zeros((1, 1, 32, 32))))


@pytest.mark.parametrize(
    "kwargs",
    [
        {"input_size": (100, 100)},
        {"widths": (8, 16), "num_stages": 4},
        {"widths": (8, 0, 32, 64)},
        {"fc_sizes": (128, -1)},
    ],
)
def test_invalid_network_config(kwargs):
    with pytest.raises(ValueError):
        NetworkConfig(**kwargs)


def test_network_config_from_config():
    config = {
        "input_height": 64,
        "input_width": 32,
        "num_stages": 2,
        "widths": [4, 8],
        "fc_sizes": [16],
    }
    network = NetworkConfig.from_config(config, seed=4)
    assert network == NetworkConfig((64, 32), (4, 8), (16,), seed=4)
    assert network != NetworkConfig((64, 32), (4, 8), (16,), seed=5)


@pytest.mark.parametrize("seed", [0, 1])
def test_end_to_end_gradients(head_example, seed):
    config = NetworkConfig((16, 16), (2, 4), (4, 3), seed=seed)
    example = head_example(size=16, seed=seed)
    image = example["image"].values.astype(np.float64)
    loss_config = LossConfig()
    names = list(parameter_shapes(config))

    def loss(tensors):
        params = ModelParams(config, tensors)
        seg_logits, ellipse_pred = forward_mtln(params, Tensor(image))
        return compute_losses(seg_logits, ellipse_pred, example, loss_config)["total_loss"]

    initial = build_mtln(config)
    analytic, numeric = gradients(loss, {name: initial[name].values for name in names})
    a = np.concatenate([analytic[n].ravel() for n in names])
    n = np.concatenate([numeric[n].ravel() for n in names])
    assert len(a) == 718
    assert np.linalg.norm(a - n) / max(np.linalg.norm(a), np.linalg.norm(n)) < 1e-2
    coordinate_error = np.abs(a - n) / np.maximum(np.maximum(np.abs(a), np.abs(n)), 1e-6)
    assert np.mean(coordinate_error < 1e-3) >= 0.95
