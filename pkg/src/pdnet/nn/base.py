from __future__ import annotations

from typing import Any, ClassVar

import numpy as np

Params = dict[str, np.ndarray]
Cache = dict[str, Any]


class Layer:
    """Stateless layer description.

    Subclasses are frozen dataclasses holding hyperparameters only.  Weights
    live in a separate ``Params`` mapping so that forward/backward are pure
    functions of ``(input, params, cache)``.  Shapes passed to ``out_shape``
    and ``param_shapes`` exclude the batch dimension.
    """

    kind: ClassVar[str] = ""
    trainable: ClassVar[tuple[str, ...]] = ()

    def out_shape(self, in_shape: tuple[int, ...]) -> tuple[int, ...]:
        return tuple(in_shape)

    def param_shapes(self, in_shape: tuple[int, ...]) -> dict[str, tuple[int, ...]]:
        return {}

    def buffer_shapes(self, in_shape: tuple[int, ...]) -> dict[str, tuple[int, ...]]:
        return {}

    def init_params(self, in_shape: tuple[int, ...], rng: np.random.Generator) -> Params:
        return {}

    def forward(self, x: np.ndarray, params: Params | None = None,
                train: bool = True) -> tuple[np.ndarray, Cache]:
        raise NotImplementedError

    def backward(self, cache: Cache, grad_out: np.ndarray, params: Params | None = None,
                 need_input_grad: bool = True) -> tuple[np.ndarray | None, Params]:
        raise NotImplementedError


def layer_backward(layer: Layer, cache: Cache, grad_out: np.ndarray,
                   params: Params | None = None) -> tuple[np.ndarray | None, Params]:
    if cache.get("layer") is not layer and cache.get("layer") != layer:
        raise ValueError(f"cache was produced by {cache.get('layer')!r}, not {layer!r}")
    if grad_out.shape != cache["out_shape"]:
        raise ValueError(f"grad_out shape {grad_out.shape} != forward output {cache['out_shape']}")
    return layer.backward(cache, grad_out, params)


def pair(v: int | tuple[int, int]) -> tuple[int, int]:
    if isinstance(v, int):
        return (v, v)
    a, b = v
    return (int(a), int(b))


def out_size(n: int, k: int, s: int, p: int) -> int:
    return (n + 2 * p - k) // s + 1
