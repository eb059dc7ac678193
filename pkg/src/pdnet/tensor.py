"""Dense float64 tensors.

Tensors are plain ``numpy.ndarray`` objects of dtype float64 in C (row-major)
order; 4-D activations use NCHW.  The helpers below add the validation the
rest of the package relies on: shape checks, scalar-only broadcasting,
division by zero as an error and non-finite results as an error.

Random numbers come from NumPy's PCG64 bit generator, seeded with a 64-bit
integer, which yields the same stream on every platform.
"""
from __future__ import annotations

from dataclasses import dataclass
from typing import Sequence, Union

import numpy as np

from pdnet.errors import NonFiniteError, ShapeError

DTYPE = np.float64
Scalar = Union[int, float]


def check_shape(shape: Sequence[int]) -> tuple[int, ...]:
    dims = tuple(int(d) for d in shape)
    if not dims:
        raise ShapeError("shape must have at least one dimension")
    if any(d < 1 for d in dims):
        raise ShapeError(f"every dimension must be >= 1, got {list(dims)}")
    count = 1
    for d in dims:
        count *= d
    if count > np.iinfo(np.intp).max:
        raise ShapeError(f"element count of {list(dims)} overflows the platform integer")
    return dims


def ensure_finite(t: np.ndarray, what: str = "tensor") -> np.ndarray:
    if not np.all(np.isfinite(t)):
        raise NonFiniteError(f"{what} contains NaN or Inf")
    return t


def seeded_rng(seed: int) -> np.random.Generator:
    """PCG64 generator for a 64-bit seed."""
    if not 0 <= int(seed) < 2**64:
        raise ValueError(f"seed must fit in 64 unsigned bits, got {seed}")
    return np.random.Generator(np.random.PCG64(int(seed)))


def derived_seed(*keys: int) -> int:
    """Combine integer keys into one 64-bit seed (SeedSequence hashing)."""
    return int(np.random.SeedSequence([int(k) for k in keys]).generate_state(1, np.uint64)[0])


@dataclass(frozen=True)
class Uniform:
    low: float
    high: float


@dataclass(frozen=True)
class Gaussian:
    mean: float
    std: float


def tensor_new(shape: Sequence[int], fill: Scalar = 0.0) -> np.ndarray:
    return np.full(check_shape(shape), float(fill), dtype=DTYPE)


def tensor_random(shape: Sequence[int], dist: Uniform | Gaussian,
                  rng: np.random.Generator) -> np.ndarray:
    dims = check_shape(shape)
    if isinstance(dist, Uniform):
        if not dist.low <= dist.high:
            raise ValueError(f"uniform bounds out of order: {dist.low} > {dist.high}")
        return rng.uniform(dist.low, dist.high, size=dims)
    if isinstance(dist, Gaussian):
        if dist.std < 0:
            raise ValueError(f"negative standard deviation {dist.std}")
        if dist.std == 0:
            # still consume the draws so the stream position does not depend on std
            rng.standard_normal(dims)
            return np.full(dims, float(dist.mean), dtype=DTYPE)
        return dist.mean + dist.std * rng.standard_normal(dims)
    raise TypeError(f"unknown distribution {dist!r}")


def matmul(a: np.ndarray, b: np.ndarray) -> np.ndarray:
    """Matrix product of two 2-D tensors.

    Delegates to BLAS ``dgemm``.  For a fixed BLAS build and thread count the
    reduction order over the inner dimension is fixed, so repeated calls on
    identical inputs are bit-identical.
    """
    if a.ndim != 2 or b.ndim != 2:
        raise ShapeError(f"matmul needs 2-D operands, got {a.shape} and {b.shape}")
    if a.shape[1] != b.shape[0]:
        raise ShapeError(f"inner dimensions differ: {a.shape} x {b.shape}")
    return np.asarray(a, dtype=DTYPE) @ np.asarray(b, dtype=DTYPE)


def reduce(t: np.ndarray, axis: int, kind: str) -> np.ndarray:
    if not 0 <= axis < t.ndim:
        raise ShapeError(f"axis {axis} out of range for rank {t.ndim}")
    if kind == "sum":
        return np.sum(t, axis=axis)
    if kind == "mean":
        return np.sum(t, axis=axis) / t.shape[axis]
    if kind == "max":
        return np.max(t, axis=axis)
    raise ValueError(f"unknown reduction {kind!r}")


_OPS = {
    "add": np.add,
    "sub": np.subtract,
    "mul": np.multiply,
    "div": np.divide,
}


def elementwise(t: np.ndarray | Scalar, u: np.ndarray | Scalar, op: str) -> np.ndarray:
    """Apply ``op`` per element.  Shapes must match unless one side is a scalar.

    Division by an exact zero raises ``ZeroDivisionError``.
    """
    if op not in _OPS:
        raise ValueError(f"unknown op {op!r}")
    t_arr = np.asarray(t, dtype=DTYPE)
    u_arr = np.asarray(u, dtype=DTYPE)
    if t_arr.ndim and u_arr.ndim and t_arr.shape != u_arr.shape:
        raise ShapeError(f"shape mismatch: {t_arr.shape} vs {u_arr.shape}")
    if op == "div" and np.any(u_arr == 0):
        raise ZeroDivisionError("division by zero in elementwise div")
    with np.errstate(over="ignore", invalid="ignore"):
        out = _OPS[op](t_arr, u_arr)
    return ensure_finite(np.asarray(out, dtype=DTYPE), f"result of {op}")
