"""Finite-difference verification of analytic layer gradients.

A layer ``y = f(x; params)`` is reduced to a scalar with a fixed random
projection ``L = sum(r * y)`` so that the upstream gradient is ``r``.  Each
input and parameter element is perturbed by ``+-h`` and the central
difference is compared with the analytic value using
``|a - n| / max(|a|, |n|, 1e-8)``.
"""
from __future__ import annotations

from dataclasses import dataclass, field
from typing import Callable

import numpy as np

from pdnet.nn.base import Layer, Params
from pdnet.nn.dense import SoftmaxCrossEntropy

FLOOR = 1e-8


@dataclass
class GradReport:
    errors: dict[str, float] = field(default_factory=dict)
    tolerance: float = 1e-4

    @property
    def max_error(self) -> float:
        return max(self.errors.values(), default=0.0)

    @property
    def passed(self) -> bool:
        return self.max_error < self.tolerance


def relative_error(analytic: np.ndarray, numeric: np.ndarray) -> float:
    a, n = np.asarray(analytic), np.asarray(numeric)
    if a.size == 0:
        return 0.0
    denom = np.maximum(np.maximum(np.abs(a), np.abs(n)), FLOOR)
    return float(np.max(np.abs(a - n) / denom))


def numeric_gradient(f: Callable[[], float], t: np.ndarray, h: float = 1e-5) -> np.ndarray:
    """Central differences of the scalar ``f`` with respect to every element of ``t`` (mutated in place, then restored)."""
    grad = np.zeros_like(t)
    flat, gflat = t.reshape(-1), grad.reshape(-1)
    for i in range(flat.size):
        orig = flat[i]
        flat[i] = orig + h
        fp = f()
        flat[i] = orig - h
        fm = f()
        flat[i] = orig
        gflat[i] = (fp - fm) / (2.0 * h)
    return grad


def grad_check(layer: Layer, x: np.ndarray, tolerance: float = 1e-4, params: Params | None = None,
               labels: np.ndarray | None = None, h: float = 1e-5, seed: int = 0,
               tamper: float = 0.0) -> GradReport:
    """Compare ``layer``'s backward pass against central differences at ``x``.

    ``tamper`` scales the analytic gradients by ``1 + tamper`` before the
    comparison; it exists so the harness can be shown to catch wrong gradients.
    """
    x = np.array(x, dtype=np.float64)
    params = {k: np.array(v, dtype=np.float64) for k, v in (params or {}).items()}
    report = GradReport(tolerance=tolerance)

    if isinstance(layer, SoftmaxCrossEntropy):
        def loss() -> float:
            return layer.forward(x, labels)[0]

        _, _, cache = layer.forward(x, labels)
        dx, grads = layer.backward(cache, 1.0)
    else:
        y, cache = layer.forward(x, params, train=True)
        r = np.random.default_rng(seed).standard_normal(y.shape)

        def loss() -> float:
            return float(np.sum(layer.forward(x, params, train=True)[0] * r))

        dx, grads = layer.backward(cache, r, params)

    scale = 1.0 + tamper
    report.errors["input"] = relative_error(dx * scale, numeric_gradient(loss, x, h))
    for name in layer.trainable:
        report.errors[name] = relative_error(grads[name] * scale, numeric_gradient(loss, params[name], h))
    return report


# Randomized cases for the suite -------------------------------------------------

CASES = ("conv", "maxpool", "avgpool", "sigmoid", "tanh", "relu", "lrn", "bn", "fc", "softmax")
GROUPS = {
    "all": CASES,
    "pool": ("maxpool", "avgpool"),
    "act": ("sigmoid", "tanh", "relu"),
}
KINK = 1e-3


def _away_from_zero(x: np.ndarray, rng: np.random.Generator) -> np.ndarray:
    near = np.abs(x) < KINK
    while near.any():
        x[near] = rng.standard_normal(near.sum())
        near = np.abs(x) < KINK
    return x


def _distinct(shape, rng: np.random.Generator) -> np.ndarray:
    """Values separated by at least 0.03 so no pooling window has a near tie."""
    n = int(np.prod(shape))
    grid = (np.arange(n) - n / 2) * 0.05 + rng.uniform(-0.01, 0.01, n)
    return rng.permutation(grid).reshape(shape)


def random_case(name: str, rng: np.random.Generator):
    """Build ``(layer, x, params, labels)`` for one randomized trial of ``name``."""
    from pdnet.nn.activation import Activation
    from pdnet.nn.conv import Conv2d
    from pdnet.nn.dense import Linear
    from pdnet.nn.norm import LRN, BatchNorm
    from pdnet.nn.pool import Pool2d

    n = int(rng.integers(1, 3))
    labels = None
    if name == "conv":
        c, o = int(rng.integers(1, 4)), int(rng.integers(1, 4))
        k, s, p = int(rng.integers(1, 4)), int(rng.integers(1, 3)), int(rng.integers(0, 2))
        hw = int(rng.integers(max(k, 3), 7))
        layer = Conv2d(c, o, k, s, p)
        x = rng.standard_normal((n, c, hw, hw))
        params = {"W": rng.standard_normal((o, c, k, k)), "b": rng.standard_normal(o)}
    elif name in ("maxpool", "avgpool"):
        k, s = int(rng.integers(1, 4)), int(rng.integers(1, 3))
        hw = int(rng.integers(k, 7))
        layer = Pool2d("max" if name == "maxpool" else "mean", k, s)
        x = _distinct((n, int(rng.integers(1, 4)), hw, hw), rng)
        params = {}
    elif name in ("sigmoid", "tanh", "relu"):
        layer = Activation(name)
        x = rng.uniform(-3, 3, (n, int(rng.integers(1, 4)), 3, 3))
        if name == "relu":
            x = _away_from_zero(x, rng)
        params = {}
    elif name == "lrn":
        if rng.random() < 0.25:
            layer = LRN()
        else:
            layer = LRN(local_size=int(rng.choice([1, 3, 5])), alpha=float(rng.uniform(0.1, 2.0)),
                        beta=float(rng.uniform(0.5, 1.0)), k=float(rng.uniform(1.0, 2.0)))
        x = rng.standard_normal((n, int(rng.integers(1, 7)), 3, 3))
        params = {}
    elif name == "bn":
        c = int(rng.integers(1, 4))
        layer = BatchNorm(c, eps=float(10 ** rng.uniform(-5, -3)))
        shape = (int(rng.integers(2, 5)), c) if rng.random() < 0.3 else (n, c, 3, 3)
        x = rng.standard_normal(shape) * rng.uniform(0.5, 2.0) + rng.uniform(-1, 1)
        params = {"gamma": rng.uniform(0.5, 2.0, c), "beta": rng.standard_normal(c),
                  "running_mean": np.zeros(c), "running_var": np.ones(c)}
    elif name == "fc":
        i, o = int(rng.integers(1, 8)), int(rng.integers(1, 6))
        layer = Linear(i, o)
        x = rng.standard_normal((n, i))
        params = {"W": rng.standard_normal((o, i)), "b": rng.standard_normal(o)}
    elif name == "softmax":
        k = int(rng.integers(2, 6))
        layer = SoftmaxCrossEntropy(k)
        n = int(rng.integers(1, 5))
        x = rng.standard_normal((n, k))
        labels = rng.integers(0, k, n)
        params = {}
    else:
        raise ValueError(f"unknown gradient-check case {name!r}")
    return layer, x, params, labels


def run_suite(names, trials: int, tolerance: float, seed: int = 0) -> dict[str, GradReport]:
    """Worst report per case name over ``trials`` seeded random configurations."""
    worst: dict[str, GradReport] = {}
    for name in names:
        for t in range(trials):
            rng = np.random.default_rng([seed, CASES.index(name), t])
            layer, x, params, labels = random_case(name, rng)
            rep = grad_check(layer, x, tolerance, params, labels, seed=int(rng.integers(2**32)))
            if name not in worst or rep.max_error > worst[name].max_error:
                worst[name] = rep
    return worst
