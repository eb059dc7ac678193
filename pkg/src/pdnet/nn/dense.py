from __future__ import annotations

from dataclasses import dataclass
from math import prod

import numpy as np

from pdnet.errors import ShapeError
from pdnet.nn.base import Layer


@dataclass(frozen=True)
class Linear(Layer):
    """Fully connected layer ``y = x W^T + b``; inputs are flattened per sample."""

    in_dim: int
    out_dim: int
    bias: bool = True

    kind = "fc"

    @property
    def trainable(self):
        return ("W", "b") if self.bias else ("W",)

    def out_shape(self, in_shape):
        if prod(in_shape) != self.in_dim:
            raise ShapeError(f"fc expects {self.in_dim} inputs, got shape {tuple(in_shape)}")
        return (self.out_dim,)

    def param_shapes(self, in_shape):
        shapes = {"W": (self.out_dim, self.in_dim)}
        if self.bias:
            shapes["b"] = (self.out_dim,)
        return shapes

    def init_params(self, in_shape, rng):
        params = {"W": rng.standard_normal((self.out_dim, self.in_dim)) * np.sqrt(2.0 / self.in_dim)}
        if self.bias:
            params["b"] = np.zeros(self.out_dim)
        return params

    def forward(self, x, params=None, train=True):
        flat = x.reshape(x.shape[0], -1)
        if flat.shape[1] != self.in_dim:
            raise ShapeError(f"fc expects {self.in_dim} inputs, got {flat.shape[1]}")
        w = params["W"]
        if w.shape != (self.out_dim, self.in_dim):
            raise ShapeError(f"weight shape {w.shape} != {(self.out_dim, self.in_dim)}")
        y = flat @ w.T
        if self.bias:
            y += params["b"]
        return y, {"layer": self, "x": flat, "x_shape": x.shape, "out_shape": y.shape}

    def backward(self, cache, grad_out, params=None, need_input_grad=True):
        grads = {"W": grad_out.T @ cache["x"]}
        if self.bias:
            grads["b"] = grad_out.sum(axis=0)
        dx = (grad_out @ params["W"]).reshape(cache["x_shape"]) if need_input_grad else None
        return dx, grads


def log_softmax(logits: np.ndarray) -> np.ndarray:
    shifted = logits - logits.max(axis=1, keepdims=True)
    return shifted - np.log(np.exp(shifted).sum(axis=1, keepdims=True))


@dataclass(frozen=True)
class SoftmaxCrossEntropy(Layer):
    """Softmax followed by mean negative log-likelihood over the batch.

    Inputs are flattened per sample, so any shape with ``num_classes``
    elements per sample is accepted.
    """

    num_classes: int

    kind = "softmax_ce"

    def out_shape(self, in_shape):
        if prod(in_shape) != self.num_classes:
            raise ShapeError(f"loss expects ({self.num_classes},) logits, got {tuple(in_shape)}")
        return ()

    def forward(self, logits, labels, train=True):
        labels = np.asarray(labels, dtype=np.int64)
        in_shape = logits.shape
        logits = logits.reshape(in_shape[0], -1)
        n, k = logits.shape
        if k != self.num_classes:
            raise ShapeError(f"expected {self.num_classes} logits per sample, got {k}")
        if labels.shape != (n,):
            raise ShapeError(f"need one label per sample, got {labels.shape} for batch {n}")
        if np.any((labels < 0) | (labels >= k)):
            bad = labels[(labels < 0) | (labels >= k)][0]
            raise ValueError(f"label {bad} out of range [0, {k})")
        logp = log_softmax(logits)
        loss = -logp[np.arange(n), labels].sum() / n
        probs = np.exp(logp)
        return loss, probs, {"layer": self, "probs": probs, "labels": labels,
                              "x_shape": in_shape, "out_shape": ()}

    def backward(self, cache, grad_out=1.0, params=None, need_input_grad=True):
        probs, labels = cache["probs"], cache["labels"]
        n = probs.shape[0]
        d = probs.copy()
        d[np.arange(n), labels] -= 1.0
        return (d * (float(grad_out) / n)).reshape(cache["x_shape"]), {}
