"""Layer graphs: named chains of layers with symbolic shape propagation."""
from __future__ import annotations

from dataclasses import dataclass, replace
from math import prod
from typing import Iterator

from pdnet.errors import ShapeError
from pdnet.nn import (LRN, Activation, BatchNorm, Conv2d, Layer, Linear, LocallyConnected2d, Pool2d,
                      SoftmaxCrossEntropy)

INPUT = "data"


@dataclass(frozen=True)
class LayerNode:
    name: str
    layer: Layer
    bottom: str
    top: str

    @property
    def kind(self) -> str:
        return self.layer.kind


@dataclass(frozen=True)
class NetworkSpec:
    """Linear chain of nodes ending in exactly one softmax cross-entropy node."""

    nodes: tuple[LayerNode, ...]
    num_classes: int
    input_shape: tuple[int, ...]

    def __post_init__(self):
        object.__setattr__(self, "nodes", tuple(self.nodes))
        object.__setattr__(self, "input_shape", tuple(self.input_shape))
        names = [n.name for n in self.nodes]
        if len(set(names)) != len(names):
            raise ValueError(f"duplicate node names in {names}")
        prev = INPUT
        for node in self.nodes:
            if node.bottom != prev:
                raise ValueError(f"node {node.name!r} reads {node.bottom!r} but the previous output is {prev!r}")
            prev = node.top
        losses = [n.name for n in self.nodes if n.kind == "softmax_ce"]
        if len(losses) != 1 or self.nodes[-1].kind != "softmax_ce":
            raise ValueError(f"need exactly one loss node, last in the chain; found {losses}")
        if self.nodes[-1].layer.num_classes != self.num_classes:
            raise ValueError("loss node class count differs from num_classes")
        self.shapes()

    def __iter__(self) -> Iterator[LayerNode]:
        return iter(self.nodes)

    def node(self, name: str) -> LayerNode:
        for n in self.nodes:
            if n.name == name:
                return n
        raise KeyError(name)

    def shapes(self) -> list[tuple[tuple[int, ...], tuple[int, ...]]]:
        """Per-node (input, output) shapes, batch dimension excluded."""
        out, cur = [], self.input_shape
        for node in self.nodes:
            try:
                nxt = node.layer.out_shape(cur)
            except ShapeError as e:
                raise ShapeError(f"node {node.name!r}: {e}") from None
            out.append((cur, nxt))
            cur = nxt
        return out

    def trainable_shapes(self) -> dict[str, dict[str, tuple[int, ...]]]:
        shapes = {}
        for node, (ins, _) in zip(self.nodes, self.shapes()):
            ps = node.layer.param_shapes(ins)
            if ps:
                shapes[node.name] = ps
        return shapes

    def buffer_shapes(self) -> dict[str, dict[str, tuple[int, ...]]]:
        shapes = {}
        for node, (ins, _) in zip(self.nodes, self.shapes()):
            bs = node.layer.buffer_shapes(ins)
            if bs:
                shapes[node.name] = bs
        return shapes

    def without(self, name: str) -> NetworkSpec:
        """Drop node ``name`` and reconnect its successor to its input."""
        idx = [n.name for n in self.nodes].index(name)
        removed = self.nodes[idx]
        nodes = list(self.nodes[:idx]) + list(self.nodes[idx + 1:])
        if idx < len(nodes):
            nodes[idx] = replace(nodes[idx], bottom=removed.bottom)
        return NetworkSpec(tuple(nodes), self.num_classes, self.input_shape)


def param_count(spec: NetworkSpec) -> int:
    """Total weight and bias elements over all trainable layers (exact integer)."""
    return sum(prod(s) for ps in spec.trainable_shapes().values() for s in ps.values())


def chain(layers: list[tuple[str, Layer]], num_classes: int, input_shape) -> NetworkSpec:
    """Wire ``(name, layer)`` pairs into a chain whose blobs are named after their nodes."""
    nodes, prev = [], INPUT
    for name, layer in layers:
        nodes.append(LayerNode(name, layer, prev, name))
        prev = name
    return NetworkSpec(tuple(nodes), num_classes, tuple(input_shape))


def dense_connection_spec(image: int = 1000, hidden: int = 10**6) -> NetworkSpec:
    """Every pixel of an ``image x image`` input wired to every hidden unit, no biases."""
    return chain([("fc", Linear(image * image, hidden, bias=False)),
                  ("loss", SoftmaxCrossEntropy(hidden))], hidden, (1, image, image))


def local_connection_spec(image: int = 1000, kernel: int = 10, hidden: int = 10**6) -> NetworkSpec:
    """Each hidden unit sees its own ``kernel x kernel`` patch, weights unshared, no biases.

    Patches tile the image without overlap; the remaining hidden units are
    spread over output channels.
    """
    side = image // kernel
    channels = hidden // (side * side)
    if channels * side * side != hidden:
        raise ValueError(f"{hidden} hidden units do not tile a {side}x{side} grid")
    return chain([("local", LocallyConnected2d(1, channels, kernel, kernel, 0, bias=False)),
                  ("loss", SoftmaxCrossEntropy(hidden))], hidden, (1, image, image))


# Text dump ---------------------------------------------------------------------

def _fmt(v) -> str:
    if isinstance(v, bool):
        return "true" if v else "false"
    if isinstance(v, float):
        return f"{v:g}"
    return str(v)


def _layer_block(layer: Layer) -> tuple[str, str | None, dict]:
    if isinstance(layer, Conv2d):
        return "Convolution", "convolution_param", {
            "num_output": layer.out_channels, "kernel_size": _hw(layer.kernel),
            "stride": _hw(layer.stride), "pad": _hw(layer.pad), "bias_term": layer.bias}
    if isinstance(layer, LocallyConnected2d):
        return "LocallyConnected", "local_param", {
            "num_output": layer.out_channels, "kernel_size": _hw(layer.kernel),
            "stride": _hw(layer.stride), "pad": _hw(layer.pad), "bias_term": layer.bias}
    if isinstance(layer, Pool2d):
        return "Pooling", "pooling_param", {
            "pool": "MAX" if layer.mode == "max" else "AVE",
            "kernel_size": _hw(layer.window), "stride": _hw(layer.stride)}
    if isinstance(layer, Activation):
        return {"relu": "ReLU", "sigmoid": "Sigmoid", "tanh": "TanH"}[layer.fn], None, {}
    if isinstance(layer, LRN):
        return "LRN", "lrn_param", {"local_size": layer.local_size, "alpha": layer.alpha,
                                    "beta": layer.beta, "k": layer.k}
    if isinstance(layer, BatchNorm):
        return "BatchNorm", "batch_norm_param", {"eps": layer.eps, "moving_average_fraction": layer.momentum}
    if isinstance(layer, Linear):
        return "InnerProduct", "inner_product_param", {"num_output": layer.out_dim, "bias_term": layer.bias}
    if isinstance(layer, SoftmaxCrossEntropy):
        return "SoftmaxWithLoss", None, {}
    raise TypeError(f"no text form for {layer!r}")


def _hw(v: tuple[int, int]):
    return v[0] if v[0] == v[1] else f"{v[0]}x{v[1]}"


def spec_to_text(spec: NetworkSpec) -> str:
    lines = [f'input: "{INPUT}"',
             "input_shape: [" + ", ".join(str(d) for d in spec.input_shape) + "]",
             f"num_classes: {spec.num_classes}"]
    for node in spec.nodes:
        type_name, block, fields = _layer_block(node.layer)
        lines += ["layer{", f'  name: "{node.name}"', f'  type: "{type_name}"',
                  f'  bottom: "{node.bottom}"', f'  top: "{node.top}"']
        if block:
            lines.append(f"  {block}{{")
            lines += [f"    {k}: {_fmt(v)}" for k, v in fields.items()]
            lines.append("  }")
        lines.append("}")
    return "\n".join(lines) + "\n"
