"""AlexNet-style network builders.

Both scales share one layer geometry and differ only in the width table:

=====  =====  ==========================  ==========
scale  input  conv1..conv5 channels        fc6, fc7
=====  =====  ==========================  ==========
full   227    96, 256, 384, 384, 256      4096, 4096
mini   64     12, 32, 48, 48, 32          256, 128
=====  =====  ==========================  ==========

conv1 is 11x11 stride 4 pad 2, conv2 5x5 pad 2, conv3-5 3x3 pad 1, and the
three max-pools are 3x3 stride 2.  At full scale the pooled maps are 27, 13
and 6 pixels wide; at mini scale 7, 3 and 1.  Input is one grayscale channel.
"""
from __future__ import annotations

from pdnet.model.spec import NetworkSpec, chain
from pdnet.nn import LRN, Activation, BatchNorm, Conv2d, Linear, Pool2d, SoftmaxCrossEntropy

WIDTHS = {
    "full": {"input": 227, "conv": (96, 256, 384, 384, 256), "fc": (4096, 4096)},
    "mini": {"input": 64, "conv": (12, 32, 48, 48, 32), "fc": (256, 128)},
}
CONV_GEOMETRY = ((11, 4, 2), (5, 1, 2), (3, 1, 1), (3, 1, 1), (3, 1, 1))  # kernel, stride, pad
POOLED_AFTER = (1, 2, 5)
MODELS = ("alexnet", "alexnet-opt-lrn", "alexnet-opt-bn")


def _pool():
    return Pool2d("max", 3, 2)


def _layers(num_classes: int, scale: str, norm_kind: str | None):
    if num_classes < 2:
        raise ValueError(f"num_classes must be >= 2, got {num_classes}")
    if scale not in WIDTHS:
        raise ValueError(f"scale must be one of {sorted(WIDTHS)}, got {scale!r}")
    table = WIDTHS[scale]
    size = table["input"]
    layers, in_ch = [], 1
    for i, (out_ch, (k, s, p)) in enumerate(zip(table["conv"], CONV_GEOMETRY), start=1):
        layers.append((f"conv{i}", Conv2d(in_ch, out_ch, k, s, p)))
        layers.append((f"relu{i}", Activation("relu")))
        size = (size + 2 * p - k) // s + 1
        if i in POOLED_AFTER:
            layers.append((f"pool{i}", _pool()))
            size = (size - 3) // 2 + 1
        in_ch = out_ch
    if norm_kind == "lrn":
        layers.append(("norm5", LRN(local_size=5, alpha=0.0001, beta=0.75)))
    elif norm_kind == "batchnorm":
        layers.append(("norm5", BatchNorm(in_ch)))
    elif norm_kind is not None:
        raise ValueError(f"norm_kind must be 'lrn' or 'batchnorm', got {norm_kind!r}")
    fan_in = in_ch * size * size
    for i, width in enumerate(table["fc"], start=6):
        layers.append((f"fc{i}", Linear(fan_in, width)))
        layers.append((f"relu{i}", Activation("relu")))
        fan_in = width
    layers.append(("fc8", Linear(fan_in, num_classes)))
    layers.append(("loss", SoftmaxCrossEntropy(num_classes)))
    return layers, (1, table["input"], table["input"])


def build_alexnet(num_classes: int, scale: str = "mini") -> NetworkSpec:
    """Five conv layers and three fully connected layers, ReLU after each except fc8."""
    layers, shape = _layers(num_classes, scale, None)
    return chain(layers, num_classes, shape)


def build_alexnet_optimized(num_classes: int, scale: str = "mini", norm_kind: str = "lrn") -> NetworkSpec:
    """The baseline with one extra ``norm5`` node between pool5 and fc6."""
    layers, shape = _layers(num_classes, scale, norm_kind)
    return chain(layers, num_classes, shape)


def build_model(model: str, num_classes: int, scale: str = "mini") -> NetworkSpec:
    if model == "alexnet":
        return build_alexnet(num_classes, scale)
    if model == "alexnet-opt-lrn":
        return build_alexnet_optimized(num_classes, scale, "lrn")
    if model == "alexnet-opt-bn":
        return build_alexnet_optimized(num_classes, scale, "batchnorm")
    raise ValueError(f"unknown model {model!r}; choose from {MODELS}")
