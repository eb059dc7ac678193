"""Whole-network forward and backward passes."""
from __future__ import annotations

from dataclasses import dataclass, field
from typing import Any

import numpy as np

from pdnet.errors import ShapeError
from pdnet.model.spec import NetworkSpec
from pdnet.model.weights import WeightStore
from pdnet.nn.dense import log_softmax


@dataclass
class ForwardPass:
    logits: np.ndarray
    probs: np.ndarray
    loss: float | None = None
    train: bool = False
    caches: list[Any] = field(default_factory=list)
    loss_cache: dict | None = None
    buffers: WeightStore = field(default_factory=dict)


def network_forward(spec: NetworkSpec, weights: WeightStore, x: np.ndarray,
                    labels: np.ndarray | None = None, train: bool = False) -> ForwardPass:
    """Run ``x`` through every node.

    Train mode keeps the per-node caches needed by :func:`network_backward`
    and collects updated batch-norm running statistics in ``buffers``; it
    never modifies ``weights``.
    """
    if x.shape[1:] != spec.input_shape:
        raise ShapeError(f"input batch shape {x.shape} does not match {spec.input_shape}")
    h = x
    fp = ForwardPass(logits=None, probs=None, train=train)
    for node in spec.nodes[:-1]:
        try:
            h, cache = node.layer.forward(h, weights.get(node.name, {}), train=train)
        except (ShapeError, KeyError, ValueError) as e:
            raise ShapeError(f"node {node.name!r}: {e}") from e
        if train:
            fp.caches.append(cache)
            if "buffers" in cache:
                fp.buffers[node.name] = cache["buffers"]
    fp.logits = h.reshape(h.shape[0], -1)
    loss_node = spec.nodes[-1]
    if labels is not None:
        fp.loss, fp.probs, fp.loss_cache = loss_node.layer.forward(fp.logits, labels)
    else:
        fp.probs = np.exp(log_softmax(fp.logits))
    return fp


def network_backward(spec: NetworkSpec, weights: WeightStore, fp: ForwardPass,
                     grad_loss: float = 1.0, input_grad: bool = False):
    """Gradients of ``grad_loss * loss`` for every trainable parameter.

    Returns the gradient store, plus the input gradient when ``input_grad``.
    """
    if not fp.train or fp.loss_cache is None or len(fp.caches) != len(spec.nodes) - 1:
        raise ValueError("backward needs the caches of a train-mode forward pass with labels")
    first_trainable = next((i for i, n in enumerate(spec.nodes) if n.layer.trainable), len(spec.nodes))
    g, _ = spec.nodes[-1].layer.backward(fp.loss_cache, grad_loss)
    grads: WeightStore = {}
    for i in range(len(spec.nodes) - 2, -1, -1):
        node = spec.nodes[i]
        cache = fp.caches[i]
        if cache["layer"] != node.layer:
            raise ValueError(f"cache for node {node.name!r} is stale")
        need = input_grad or i > first_trainable
        g, pg = node.layer.backward(cache, g.reshape(cache["out_shape"]), weights.get(node.name), need)
        if pg:
            grads[node.name] = pg
        if g is None:
            break
    return (grads, g) if input_grad else grads
