"""Weight stores and their versioned binary file format.

A weight store maps node name -> parameter name -> float64 array.  It holds
trainable parameters and, for batch-norm nodes, the running statistics.

File layout (all integers little-endian)::

    b"PDNW"  u32 version  u32 entry_count
    entry_count x ( u16 key_len, key utf-8 "node/param",
                    u8 ndim, ndim x u64 dims, prod(dims) x f64 )

Nothing follows the last entry.
"""
from __future__ import annotations

import io
import os
import struct
import zlib

import numpy as np

from pdnet.errors import CheckpointError, ShapeError
from pdnet.model.spec import NetworkSpec

WeightStore = dict[str, dict[str, np.ndarray]]

MAGIC = b"PDNW"
VERSION = 1


def init_weights(spec: NetworkSpec, seed: int = 0) -> WeightStore:
    """He-normal conv/fc weights, zero biases, unit BN scale.

    Each node draws from its own stream keyed by ``(seed, crc32(name))``, so
    inserting a node leaves the other nodes' initial weights unchanged.
    """
    store: WeightStore = {}
    for node, (ins, _) in zip(spec.nodes, spec.shapes()):
        rng = np.random.default_rng([seed, zlib.crc32(node.name.encode())])
        params = node.layer.init_params(ins, rng)
        if params:
            store[node.name] = params
    return store


def check_weights(spec: NetworkSpec, store: WeightStore, buffers: bool = True) -> None:
    expected = spec.trainable_shapes()
    if buffers:
        for name, bs in spec.buffer_shapes().items():
            expected.setdefault(name, {}).update(bs)
    for name in store:
        if name not in expected:
            raise ShapeError(f"weight store has entry {name!r} that is not a trainable node of the network")
    for name, shapes in expected.items():
        if name not in store:
            raise ShapeError(f"no weights for node {name!r}")
        for pname, shape in shapes.items():
            arr = store[name].get(pname)
            if arr is None:
                raise ShapeError(f"node {name!r} is missing parameter {pname!r}")
            if arr.shape != tuple(shape):
                raise ShapeError(f"node {name!r} parameter {pname!r}: shape {arr.shape} != {tuple(shape)}")


def copy_store(store: WeightStore) -> WeightStore:
    return {k: {p: a.copy() for p, a in v.items()} for k, v in store.items()}


def stores_equal(a: WeightStore, b: WeightStore) -> bool:
    """Bitwise equality of two stores."""
    if a.keys() != b.keys():
        return False
    for k in a:
        if a[k].keys() != b[k].keys():
            return False
        for p in a[k]:
            x, y = a[k][p], b[k][p]
            if x.shape != y.shape or x.tobytes() != y.tobytes():
                return False
    return True


def encode_store(store: WeightStore) -> bytes:
    buf = io.BytesIO()
    entries = [(f"{k}/{p}", arr) for k in store for p, arr in store[k].items()]
    buf.write(MAGIC + struct.pack("<II", VERSION, len(entries)))
    for key, arr in entries:
        kb = key.encode("utf-8")
        buf.write(struct.pack("<H", len(kb)) + kb)
        buf.write(struct.pack("<B", arr.ndim) + struct.pack(f"<{arr.ndim}Q", *arr.shape))
        buf.write(np.ascontiguousarray(arr, dtype="<f8").tobytes())
    return buf.getvalue()


def decode_store(data: bytes) -> WeightStore:
    view = memoryview(data)
    pos = 0

    def take(n: int) -> memoryview:
        nonlocal pos
        if pos + n > len(view):
            raise CheckpointError(f"weight data truncated at byte {pos} (needed {n} more, {len(view) - pos} left)")
        chunk = view[pos:pos + n]
        pos += n
        return chunk

    if bytes(take(4)) != MAGIC:
        raise CheckpointError("not a weight file (bad magic)")
    version, count = struct.unpack("<II", take(8))
    if version != VERSION:
        raise CheckpointError(f"unsupported weight format version {version}, expected {VERSION}")
    store: WeightStore = {}
    for _ in range(count):
        (klen,) = struct.unpack("<H", take(2))
        key = bytes(take(klen)).decode("utf-8")
        (ndim,) = struct.unpack("<B", take(1))
        dims = struct.unpack(f"<{ndim}Q", take(8 * ndim))
        n = int(np.prod(dims, dtype=np.int64))
        arr = np.frombuffer(take(8 * n), dtype="<f8").astype(np.float64).reshape(dims)
        node, _, pname = key.rpartition("/")
        store.setdefault(node, {})[pname] = arr
    if pos != len(view):
        raise CheckpointError(f"{len(view) - pos} unexpected bytes after the last weight entry")
    return store


def save_weights(store: WeightStore, path: str | os.PathLike) -> None:
    with open(path, "wb") as fh:
        fh.write(encode_store(store))


def load_weights(path: str | os.PathLike, spec: NetworkSpec | None = None) -> WeightStore:
    """Read a weight file; with ``spec``, also check names and shapes against it."""
    with open(path, "rb") as fh:
        store = decode_store(fh.read())
    if spec is not None:
        check_weights(spec, store)
    return store
