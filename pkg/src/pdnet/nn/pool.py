from __future__ import annotations

from dataclasses import dataclass

import numpy as np
from numpy.lib.stride_tricks import sliding_window_view

from pdnet.errors import ShapeError
from pdnet.nn.base import Layer, out_size, pair


@dataclass(frozen=True)
class Pool2d(Layer):
    """Max or mean pooling over ``window`` with ``stride``, no padding.

    Max pooling records the flat argmax of every window (first maximum on
    ties) and routes the whole upstream gradient there; mean pooling spreads
    it uniformly over the window.
    """

    mode: str = "max"
    window: tuple[int, int] = (2, 2)
    stride: tuple[int, int] = (2, 2)

    def __post_init__(self):
        if self.mode not in ("max", "mean"):
            raise ValueError(f"pool mode must be 'max' or 'mean', got {self.mode!r}")
        object.__setattr__(self, "window", pair(self.window))
        object.__setattr__(self, "stride", pair(self.stride))
        if min(self.window) < 1 or min(self.stride) < 1:
            raise ShapeError("pool window and stride must be >= 1")

    @property
    def kind(self):
        return "maxpool" if self.mode == "max" else "avgpool"

    def out_shape(self, in_shape):
        if len(in_shape) != 3:
            raise ShapeError(f"pooling expects (C, H, W), got {tuple(in_shape)}")
        c, h, w = in_shape
        (kh, kw), (sh, sw) = self.window, self.stride
        if kh > h or kw > w:
            raise ShapeError(f"pool window {self.window} larger than {h}x{w} input")
        return (c, out_size(h, kh, sh, 0), out_size(w, kw, sw, 0))

    def forward(self, x, params=None, train=True):
        if x.ndim != 4:
            raise ShapeError(f"pool input must be NCHW, got shape {x.shape}")
        self.out_shape(x.shape[1:])
        (kh, kw), (sh, sw) = self.window, self.stride
        win = sliding_window_view(x, (kh, kw), axis=(2, 3))[:, :, ::sh, ::sw]
        n, c, ho, wo = win.shape[:4]
        cache = {"layer": self, "x_shape": x.shape, "out_shape": (n, c, ho, wo)}
        if self.mode == "max":
            flat = win.reshape(n, c, ho, wo, kh * kw)
            idx = np.argmax(flat, axis=-1)
            y = np.take_along_axis(flat, idx[..., None], axis=-1)[..., 0]
            cache["argmax"] = idx
        else:
            y = win.sum(axis=(-2, -1)) / (kh * kw)
        return np.ascontiguousarray(y), cache

    def backward(self, cache, grad_out, params=None, need_input_grad=True):
        (kh, kw), (sh, sw) = self.window, self.stride
        n, c, ho, wo = grad_out.shape
        dx = np.zeros(cache["x_shape"])
        if self.mode == "mean":
            share = grad_out / (kh * kw)
        for u in range(kh):
            for v in range(kw):
                if self.mode == "max":
                    share = np.where(cache["argmax"] == u * kw + v, grad_out, 0.0)
                dx[:, :, u:u + sh * (ho - 1) + 1:sh, v:v + sw * (wo - 1) + 1:sw] += share
        return dx, {}
