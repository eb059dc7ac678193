import math
from dataclasses import replace

import numpy as np
import pytest

from pdnet.errors import CheckpointError, ShapeError
from pdnet.model import (MODELS, build_alexnet, build_alexnet_optimized, build_model, chain,
                         check_weights, dense_connection_spec, init_weights, load_weights,
                         local_connection_spec, network_backward, network_forward, param_count,
                         save_weights, spec_to_text, stores_equal)
from pdnet.model.weights import decode_store, encode_store
from pdnet.nn import Activation, BatchNorm, Conv2d, Linear, SoftmaxCrossEntropy
from pdnet.nn.gradcheck import numeric_gradient, relative_error


def kinds(spec):
    return [n.kind for n in spec.nodes]


# parameter counts ----------------------------------------------------------------

def test_dense_connection_count():
    assert param_count(dense_connection_spec()) == 10**12


def test_local_connection_count():
    spec = local_connection_spec()
    assert param_count(spec) == 10**8
    # one hidden unit per output position and channel, each seeing a 10x10 patch
    assert math.prod(spec.shapes()[0][1]) == 10**6


def test_weight_sharing_ratio():
    assert param_count(dense_connection_spec()) // param_count(local_connection_spec()) == 10**4
    assert param_count(dense_connection_spec()) % param_count(local_connection_spec()) == 0


# builders ------------------------------------------------------------------------

@pytest.mark.parametrize("scale", ["mini", "full"])
def test_alexnet_layout(scale):
    spec = build_alexnet(3, scale)
    assert kinds(spec).count("conv") == 5 and kinds(spec).count("fc") == 3
    assert spec.node("fc8").layer.out_dim == 3
    assert spec.shapes()[-1][0] == (3,)
    assert spec.node("relu7") and "relu8" not in [n.name for n in spec.nodes]


def test_full_scale_feature_map_sizes():
    shapes = dict(zip([n.name for n in build_alexnet(3, "full").nodes], build_alexnet(3, "full").shapes()))
    assert shapes["pool1"][1] == (96, 27, 27)
    assert shapes["pool2"][1] == (256, 13, 13)
    assert shapes["pool5"][1] == (256, 6, 6)


@pytest.mark.parametrize("scale", ["mini", "full"])
@pytest.mark.parametrize("norm_kind", ["lrn", "batchnorm"])
def test_optimized_adds_exactly_norm5(scale, norm_kind):
    base = build_alexnet(3, scale)
    opt = build_alexnet_optimized(3, scale, norm_kind)
    assert len(opt.nodes) == len(base.nodes) + 1
    names = [n.name for n in opt.nodes]
    i = names.index("norm5")
    assert opt.nodes[i].bottom == "pool5" and opt.nodes[i + 1].name == "fc6"
    assert opt.nodes[i + 1].bottom == "norm5"
    assert opt.without("norm5") == base


def test_norm5_lrn_parameters():
    layer = build_alexnet_optimized(3, "mini", "lrn").node("norm5").layer
    assert (layer.local_size, layer.alpha, layer.beta) == (5, 0.0001, 0.75)
    assert isinstance(build_alexnet_optimized(3, "mini", "batchnorm").node("norm5").layer, BatchNorm)


def test_parameter_count_differences():
    base = param_count(build_alexnet(3))
    assert param_count(build_alexnet_optimized(3, norm_kind="lrn")) == base
    channels = build_alexnet(3).shapes()[[n.name for n in build_alexnet(3).nodes].index("pool5")][1][0]
    assert param_count(build_alexnet_optimized(3, norm_kind="batchnorm")) == base + 2 * channels


def test_builders_are_deterministic():
    for model in MODELS:
        assert build_model(model, 3) == build_model(model, 3)
    with pytest.raises(ValueError):
        build_model("vgg", 3)
    with pytest.raises(ValueError):
        build_alexnet(1)
    with pytest.raises(ValueError):
        build_alexnet_optimized(3, norm_kind="group")


def test_spec_validation():
    good = [("fc", Linear(4, 2)), ("loss", SoftmaxCrossEntropy(2))]
    chain(good, 2, (4,))
    with pytest.raises(ValueError):
        chain([("fc", Linear(4, 2)), ("fc", Activation())] + good[1:], 2, (4,))
    with pytest.raises(ValueError):
        chain(good[:1], 2, (4,))
    with pytest.raises(ShapeError):
        chain(good, 2, (5,))
    spec = chain(good, 2, (4,))
    with pytest.raises(ValueError):
        type(spec)((replace(spec.nodes[0], bottom="elsewhere"), spec.nodes[1]), 2, (4,))


def test_text_dump():
    text = spec_to_text(build_alexnet_optimized(3))
    assert 'name: "norm5"' in text and 'bottom: "pool5"' in text
    assert "lrn_param{\n    local_size: 5\n    alpha: 0.0001\n    beta: 0.75" in text
    assert text.count("layer{") == len(build_alexnet_optimized(3).nodes)


# forward/backward ----------------------------------------------------------------

def test_zero_weights_give_uniform_prediction():
    spec = build_alexnet(3)
    w = {k: {p: np.zeros_like(a) for p, a in v.items()} for k, v in init_weights(spec).items()}
    x = np.random.default_rng(0).normal(size=(2, 1, 64, 64))
    fp = network_forward(spec, w, x, np.array([0, 1]))
    assert fp.loss == pytest.approx(math.log(3))
    np.testing.assert_allclose(fp.probs, 1 / 3)


@pytest.mark.parametrize("model", MODELS)
def test_forward_shapes_and_batch_independence(model):
    spec = build_model(model, 3)
    w = init_weights(spec, 4)
    x = np.random.default_rng(1).normal(size=(1, 1, 64, 64))
    one = network_forward(spec, w, x).logits
    two = network_forward(spec, w, np.concatenate([x, x])).logits
    assert one.shape == (1, 3) and two.shape == (2, 3) and np.all(np.isfinite(two))
    np.testing.assert_array_equal(two[0], two[1])
    np.testing.assert_allclose(two[0], one[0], rtol=1e-12)
    assert network_forward(spec, w, x).logits.tobytes() == one.tobytes()


def test_forward_rejects_wrong_input_shape():
    with pytest.raises(ShapeError):
        network_forward(build_alexnet(3), init_weights(build_alexnet(3)), np.zeros((1, 1, 32, 32)))


def test_forward_does_not_modify_weights():
    spec = build_alexnet_optimized(3, norm_kind="batchnorm")
    w = init_weights(spec, 0)
    before = {k: {p: a.copy() for p, a in v.items()} for k, v in w.items()}
    fp = network_forward(spec, w, np.random.default_rng(0).normal(size=(4, 1, 64, 64)), np.zeros(4, int), True)
    assert stores_equal(w, before)
    assert set(fp.buffers) == {"norm5"}


def _toy():
    spec = chain([("conv", Conv2d(2, 3, 3, 1, 1)), ("relu", Activation("relu")),
                  ("fc", Linear(3 * 4 * 4, 3)), ("loss", SoftmaxCrossEntropy(3))], 3, (2, 4, 4))
    return spec, init_weights(spec, 3)


def test_network_gradient_on_toy_chain():
    spec, w = _toy()
    rng = np.random.default_rng(8)
    x = rng.normal(size=(4, 2, 4, 4))
    y = np.array([0, 1, 2, 1])
    fp = network_forward(spec, w, x, y, train=True)
    grads, dx = network_backward(spec, w, fp, input_grad=True)

    def loss():
        return network_forward(spec, w, x, y).loss

    for name, params in w.items():
        for pname, arr in params.items():
            assert relative_error(grads[name][pname], numeric_gradient(loss, arr)) < 1e-4
    assert relative_error(dx, numeric_gradient(loss, x)) < 1e-4


def test_zero_loss_gradient_gives_zero_gradients():
    spec, w = _toy()
    fp = network_forward(spec, w, np.random.default_rng(0).normal(size=(2, 2, 4, 4)), np.array([0, 1]), True)
    grads = network_backward(spec, w, fp, grad_loss=0.0)
    assert all(np.all(g == 0) for pg in grads.values() for g in pg.values())


def test_duplicated_sample_gives_same_gradient():
    spec, w = _toy()
    x = np.random.default_rng(2).normal(size=(1, 2, 4, 4))
    g1 = network_backward(spec, w, network_forward(spec, w, x, np.array([2]), True))
    g2 = network_backward(spec, w, network_forward(spec, w, np.concatenate([x, x]), np.array([2, 2]), True))
    for name in g1:
        for p in g1[name]:
            np.testing.assert_allclose(g2[name][p], g1[name][p], rtol=1e-12, atol=1e-15)


def test_backward_needs_train_pass():
    spec, w = _toy()
    fp = network_forward(spec, w, np.zeros((1, 2, 4, 4)), np.array([0]))
    with pytest.raises(ValueError):
        network_backward(spec, w, fp)


# weight files --------------------------------------------------------------------

def test_init_streams_are_per_node():
    base = init_weights(build_alexnet(3), 5)
    opt = init_weights(build_alexnet_optimized(3, norm_kind="batchnorm"), 5)
    for name in base:
        assert stores_equal({name: base[name]}, {name: opt[name]})
    assert not stores_equal(init_weights(build_alexnet(3), 6), base)


def test_weight_file_round_trip(tmp_path):
    spec = build_alexnet_optimized(3, norm_kind="batchnorm")
    w = init_weights(spec, 1)
    save_weights(w, tmp_path / "w.bin")
    back = load_weights(tmp_path / "w.bin", spec)
    assert stores_equal(w, back)
    assert (tmp_path / "w.bin").read_bytes()[:4] == b"PDNW"


def test_weight_file_against_renamed_layer(tmp_path):
    spec = build_alexnet(3)
    w = init_weights(spec)
    w["conv1_renamed"] = w.pop("conv1")
    save_weights(w, tmp_path / "w.bin")
    with pytest.raises(ShapeError, match="conv1"):
        load_weights(tmp_path / "w.bin", spec)


def test_weight_shape_mismatch():
    spec = build_alexnet(3)
    w = init_weights(spec)
    w["fc8"]["W"] = np.zeros((2, 128))
    with pytest.raises(ShapeError, match="fc8"):
        check_weights(spec, w)


def test_truncated_weight_file():
    data = encode_store(init_weights(build_alexnet(3)))
    for cut in (3, 10, len(data) // 2, len(data) - 1):
        with pytest.raises(CheckpointError):
            decode_store(data[:cut])
    with pytest.raises(CheckpointError):
        decode_store(data + b"\x00")
    with pytest.raises(CheckpointError):
        decode_store(b"XXXX" + data[4:])
    bad_version = data[:4] + (99).to_bytes(4, "little") + data[8:]
    with pytest.raises(CheckpointError, match="version"):
        decode_store(bad_version)
