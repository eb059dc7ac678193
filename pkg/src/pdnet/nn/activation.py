from __future__ import annotations

from dataclasses import dataclass

import numpy as np

from pdnet.nn.base import Layer

ACTIVATIONS = ("sigmoid", "tanh", "relu")


def sigmoid(x: np.ndarray) -> np.ndarray:
    # exp of a non-positive argument only, so no overflow for large |x|
    e = np.exp(-np.abs(x))
    return np.where(x >= 0, 1.0 / (1.0 + e), e / (1.0 + e))


@dataclass(frozen=True)
class Activation(Layer):
    fn: str = "relu"

    kind = "activation"

    def __post_init__(self):
        if self.fn not in ACTIVATIONS:
            raise ValueError(f"activation must be one of {ACTIVATIONS}, got {self.fn!r}")

    def forward(self, x, params=None, train=True):
        if self.fn == "sigmoid":
            y = sigmoid(x)
        elif self.fn == "tanh":
            y = np.tanh(x)
        else:
            y = np.maximum(x, 0.0)
        return y, {"layer": self, "x": x, "y": y, "out_shape": y.shape}

    def backward(self, cache, grad_out, params=None, need_input_grad=True):
        y = cache["y"]
        if self.fn == "sigmoid":
            dx = grad_out * y * (1.0 - y)
        elif self.fn == "tanh":
            dx = grad_out * (1.0 - y * y)
        else:
            dx = np.where(cache["x"] > 0, grad_out, 0.0)
        return dx, {}
