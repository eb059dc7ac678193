"""Local response normalization and batch normalization."""
from __future__ import annotations

from dataclasses import dataclass

import numpy as np

from pdnet.errors import ShapeError
from pdnet.nn.base import Layer


def _channel_window_sum(t: np.ndarray, half: int) -> np.ndarray:
    """Sum of ``t`` over channels within ``half`` of each channel, clipped at the ends."""
    c = t.shape[1]
    out = t.copy()
    for off in range(1, half + 1):
        if off >= c:
            break
        out[:, off:] += t[:, :-off]
        out[:, :-off] += t[:, off:]
    return out


@dataclass(frozen=True)
class LRN(Layer):
    """Cross-channel local response normalization.

    ``y = x / (k + alpha / local_size * sum(x'^2)) ** beta`` where the sum runs
    over the ``local_size`` neighbouring channels centred on each channel.
    """

    local_size: int = 5
    alpha: float = 0.0001
    beta: float = 0.75
    k: float = 1.0

    kind = "lrn"

    def __post_init__(self):
        if self.local_size < 1 or self.local_size % 2 == 0:
            raise ValueError(f"local_size must be odd and positive, got {self.local_size}")
        if self.alpha < 0 or self.beta <= 0 or self.k <= 0:
            raise ValueError(f"invalid LRN constants alpha={self.alpha} beta={self.beta} k={self.k}")

    def out_shape(self, in_shape):
        if len(in_shape) < 1:
            raise ShapeError("LRN needs a channel axis")
        return tuple(in_shape)

    def forward(self, x, params=None, train=True):
        half = self.local_size // 2
        scale = self.k + (self.alpha / self.local_size) * _channel_window_sum(x * x, half)
        y = x * scale ** -self.beta
        return y, {"layer": self, "x": x, "scale": scale, "out_shape": y.shape}

    def backward(self, cache, grad_out, params=None, need_input_grad=True):
        x, scale = cache["x"], cache["scale"]
        half = self.local_size // 2
        inner = _channel_window_sum(grad_out * x * scale ** (-self.beta - 1.0), half)
        dx = grad_out * scale ** -self.beta
        dx -= (2.0 * self.alpha * self.beta / self.local_size) * x * inner
        return dx, {}


@dataclass(frozen=True)
class BatchNorm(Layer):
    """Per-channel batch normalization with learned scale ``gamma`` and shift ``beta``.

    Train mode normalizes with the mini-batch mean and biased variance over
    every axis except the channel axis (1) and reports updated running
    statistics in the cache under ``"buffers"``; infer mode uses the running
    statistics passed in ``params``.
    """

    channels: int
    eps: float = 1e-5
    momentum: float = 0.9

    kind = "batchnorm"
    trainable = ("gamma", "beta")

    def __post_init__(self):
        if self.eps <= 0:
            raise ValueError(f"epsilon must be positive, got {self.eps}")
        if not 0 < self.momentum < 1:
            raise ValueError(f"momentum must lie in (0, 1), got {self.momentum}")

    def out_shape(self, in_shape):
        if not in_shape or in_shape[0] != self.channels:
            raise ShapeError(f"expected {self.channels} channels, got input shape {tuple(in_shape)}")
        return tuple(in_shape)

    def param_shapes(self, in_shape):
        return {"gamma": (self.channels,), "beta": (self.channels,)}

    def buffer_shapes(self, in_shape):
        return {"running_mean": (self.channels,), "running_var": (self.channels,)}

    def init_params(self, in_shape, rng):
        c = self.channels
        return {"gamma": np.ones(c), "beta": np.zeros(c),
                "running_mean": np.zeros(c), "running_var": np.ones(c)}

    def forward(self, x, params=None, train=True):
        self.out_shape(x.shape[1:])
        axes = (0,) + tuple(range(2, x.ndim))
        bshape = (1, self.channels) + (1,) * (x.ndim - 2)
        gamma = params["gamma"].reshape(bshape)
        shift = params["beta"].reshape(bshape)
        m = x.size // self.channels
        cache = {"layer": self, "train": train, "m": m, "axes": axes, "out_shape": x.shape}
        if train:
            if m < 2:
                raise ShapeError(f"batch norm in train mode needs at least 2 values per channel, got {m}")
            mu = x.sum(axis=axes) / m
            centered = x - mu.reshape(bshape)
            var = (centered * centered).sum(axis=axes) / m
            cache["buffers"] = {
                "running_mean": self.momentum * params["running_mean"] + (1 - self.momentum) * mu,
                "running_var": self.momentum * params["running_var"] + (1 - self.momentum) * var,
            }
        else:
            mu, var = params["running_mean"], params["running_var"]
            centered = x - mu.reshape(bshape)
        inv_std = 1.0 / np.sqrt(var + self.eps)
        xhat = centered * inv_std.reshape(bshape)
        cache.update(xhat=xhat, inv_std=inv_std, bshape=bshape)
        return gamma * xhat + shift, cache

    def backward(self, cache, grad_out, params=None, need_input_grad=True):
        axes, bshape, m = cache["axes"], cache["bshape"], cache["m"]
        xhat = cache["xhat"]
        grads = {"gamma": (grad_out * xhat).sum(axis=axes), "beta": grad_out.sum(axis=axes)}
        dx = None
        if need_input_grad:
            scale = (params["gamma"] * cache["inv_std"]).reshape(bshape)
            if cache["train"]:
                # gradient flows through the batch mean and variance as well
                mean_g = grad_out.sum(axis=axes).reshape(bshape) / m
                mean_gx = grads["gamma"].reshape(bshape) / m
                dx = scale * (grad_out - mean_g - xhat * mean_gx)
            else:
                dx = scale * grad_out
        return dx, grads
