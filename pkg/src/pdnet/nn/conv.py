"""Convolution (shared weights) and locally connected (unshared) layers.

Both lower to an im2col matrix built from a strided window view of the
zero-padded input.  Convolution is cross-correlation: no kernel flip.
"""
from __future__ import annotations

from dataclasses import dataclass

import numpy as np
from numpy.lib.stride_tricks import sliding_window_view

from pdnet.errors import ShapeError
from pdnet.nn.base import Layer, out_size, pair


def im2col(x: np.ndarray, kernel: tuple[int, int], stride: tuple[int, int],
           pad: tuple[int, int]) -> np.ndarray:
    """Return patches as ``(N, Ho, Wo, C, kh, kw)``."""
    (kh, kw), (sh, sw), (ph, pw) = kernel, stride, pad
    if ph or pw:
        x = np.pad(x, ((0, 0), (0, 0), (ph, ph), (pw, pw)))
    win = sliding_window_view(x, (kh, kw), axis=(2, 3))[:, :, ::sh, ::sw]
    return np.ascontiguousarray(win.transpose(0, 2, 3, 1, 4, 5))


def col2im(cols: np.ndarray, x_shape: tuple[int, ...], kernel: tuple[int, int],
           stride: tuple[int, int], pad: tuple[int, int]) -> np.ndarray:
    """Adjoint of :func:`im2col`: scatter-add patches back onto the input grid."""
    n, c, h, w = x_shape
    (kh, kw), (sh, sw), (ph, pw) = kernel, stride, pad
    _, ho, wo = cols.shape[:3]
    dx = np.zeros((n, c, h + 2 * ph, w + 2 * pw))
    src = cols.transpose(0, 3, 4, 5, 1, 2)  # N, C, kh, kw, Ho, Wo
    for u in range(kh):
        for v in range(kw):
            dx[:, :, u:u + sh * (ho - 1) + 1:sh, v:v + sw * (wo - 1) + 1:sw] += src[:, :, u, v]
    if ph or pw:
        dx = dx[:, :, ph:ph + h, pw:pw + w]
    return dx


def _spatial_out(layer, in_shape):
    if len(in_shape) != 3:
        raise ShapeError(f"{layer.kind} expects a (C, H, W) input, got {tuple(in_shape)}")
    c, h, w = in_shape
    if c != layer.in_channels:
        raise ShapeError(f"expected {layer.in_channels} input channels, got {c}")
    (kh, kw), (sh, sw), (ph, pw) = layer.kernel, layer.stride, layer.pad
    ho, wo = out_size(h, kh, sh, ph), out_size(w, kw, sw, pw)
    if ho < 1 or wo < 1:
        raise ShapeError(f"kernel {layer.kernel} does not fit a {h}x{w} input with pad {layer.pad}")
    return ho, wo


@dataclass(frozen=True)
class Conv2d(Layer):
    in_channels: int
    out_channels: int
    kernel: tuple[int, int] = (3, 3)
    stride: tuple[int, int] = (1, 1)
    pad: tuple[int, int] = (0, 0)
    bias: bool = True

    kind = "conv"

    def __post_init__(self):
        for name in ("kernel", "stride", "pad"):
            object.__setattr__(self, name, pair(getattr(self, name)))
        if self.in_channels < 1 or self.out_channels < 1:
            raise ShapeError("channel counts must be positive")
        if min(self.kernel) < 1 or min(self.stride) < 1 or min(self.pad) < 0:
            raise ShapeError(f"bad geometry kernel={self.kernel} stride={self.stride} pad={self.pad}")

    @property
    def trainable(self):
        return ("W", "b") if self.bias else ("W",)

    def out_shape(self, in_shape):
        ho, wo = _spatial_out(self, in_shape)
        return (self.out_channels, ho, wo)

    def param_shapes(self, in_shape):
        shapes = {"W": (self.out_channels, self.in_channels, *self.kernel)}
        if self.bias:
            shapes["b"] = (self.out_channels,)
        return shapes

    def init_params(self, in_shape, rng):
        fan_in = self.in_channels * self.kernel[0] * self.kernel[1]
        shapes = self.param_shapes(in_shape)
        params = {"W": rng.standard_normal(shapes["W"]) * np.sqrt(2.0 / fan_in)}
        if self.bias:
            params["b"] = np.zeros(shapes["b"])
        return params

    def forward(self, x, params=None, train=True):
        if x.ndim != 4:
            raise ShapeError(f"conv input must be NCHW, got shape {x.shape}")
        self.out_shape(x.shape[1:])
        w = params["W"]
        if w.shape != self.param_shapes(None)["W"]:
            raise ShapeError(f"weight shape {w.shape} does not match {self}")
        cols = im2col(x, self.kernel, self.stride, self.pad)
        n, ho, wo = cols.shape[:3]
        flat = cols.reshape(n * ho * wo, -1)
        y = flat @ w.reshape(self.out_channels, -1).T
        if self.bias:
            y += params["b"]
        y = np.ascontiguousarray(y.reshape(n, ho, wo, self.out_channels).transpose(0, 3, 1, 2))
        return y, {"layer": self, "cols": flat, "x_shape": x.shape, "out_shape": y.shape}

    def backward(self, cache, grad_out, params=None, need_input_grad=True):
        w = params["W"]
        n, o, ho, wo = grad_out.shape
        g = grad_out.transpose(0, 2, 3, 1).reshape(-1, o)
        grads = {"W": (g.T @ cache["cols"]).reshape(w.shape)}
        if self.bias:
            grads["b"] = g.sum(axis=0)
        dx = None
        if need_input_grad:
            c = self.in_channels
            kh, kw = self.kernel
            dcols = (g @ w.reshape(o, -1)).reshape(n, ho, wo, c, kh, kw)
            dx = col2im(dcols, cache["x_shape"], self.kernel, self.stride, self.pad)
        return dx, grads


@dataclass(frozen=True)
class LocallyConnected2d(Layer):
    """Convolution-shaped layer whose kernels are not shared across positions."""

    in_channels: int
    out_channels: int
    kernel: tuple[int, int] = (3, 3)
    stride: tuple[int, int] = (1, 1)
    pad: tuple[int, int] = (0, 0)
    bias: bool = True

    kind = "local"

    def __post_init__(self):
        for name in ("kernel", "stride", "pad"):
            object.__setattr__(self, name, pair(getattr(self, name)))

    @property
    def trainable(self):
        return ("W", "b") if self.bias else ("W",)

    def out_shape(self, in_shape):
        ho, wo = _spatial_out(self, in_shape)
        return (self.out_channels, ho, wo)

    def param_shapes(self, in_shape):
        ho, wo = _spatial_out(self, in_shape)
        k = self.in_channels * self.kernel[0] * self.kernel[1]
        shapes = {"W": (ho, wo, self.out_channels, k)}
        if self.bias:
            shapes["b"] = (self.out_channels, ho, wo)
        return shapes

    def init_params(self, in_shape, rng):
        shapes = self.param_shapes(in_shape)
        params = {"W": rng.standard_normal(shapes["W"]) * np.sqrt(2.0 / shapes["W"][-1])}
        if self.bias:
            params["b"] = np.zeros(shapes["b"])
        return params

    def forward(self, x, params=None, train=True):
        if x.ndim != 4:
            raise ShapeError(f"local input must be NCHW, got shape {x.shape}")
        shapes = self.param_shapes(x.shape[1:])
        if params["W"].shape != shapes["W"]:
            raise ShapeError(f"weight shape {params['W'].shape} != {shapes['W']}")
        cols = im2col(x, self.kernel, self.stride, self.pad)
        n, ho, wo = cols.shape[:3]
        cols = cols.reshape(n, ho, wo, -1)
        y = np.einsum("nhwk,hwok->nohw", cols, params["W"])
        if self.bias:
            y += params["b"]
        return y, {"layer": self, "cols": cols, "x_shape": x.shape, "out_shape": y.shape}

    def backward(self, cache, grad_out, params=None, need_input_grad=True):
        cols = cache["cols"]
        grads = {"W": np.einsum("nohw,nhwk->hwok", grad_out, cols)}
        if self.bias:
            grads["b"] = grad_out.sum(axis=0)
        dx = None
        if need_input_grad:
            n, ho, wo, _ = cols.shape
            kh, kw = self.kernel
            dcols = np.einsum("nohw,hwok->nhwk", grad_out, params["W"])
            dcols = dcols.reshape(n, ho, wo, self.in_channels, kh, kw)
            dx = col2im(dcols, cache["x_shape"], self.kernel, self.stride, self.pad)
        return dx, grads
