"""Differentiable primitives recorded on a `Graph`.

Every op takes nodes (or plain arrays / scalars, lifted to constants on the
graph of the first node argument) and returns a new node.
"""
from __future__ import annotations

from typing import Any

import numpy as np
from microedit.shared.exception import ContractError
from microedit.shared.exception import DimensionError

from . import tensor as T
from .autodiff import Graph
from .autodiff import Node


def _graph_of(*items: Any) -> Graph:
    for item in items:
        if isinstance(item, Node):
            return item.graph
    raise ContractError('At least one operand must be a graph node')


def _unbroadcast(g: np.ndarray, shape: tuple[int, ...]) -> np.ndarray:
    while g.ndim > len(shape):
        g = g.sum(axis=0)
    for axis, size in enumerate(shape):
        if size == 1 and g.shape[axis] != 1:
            g = g.sum(axis=axis, keepdims=True)
    return g


def add(a, b) -> Node:
    graph = _graph_of(a, b)
    a, b = graph.lift(a), graph.lift(b)
    return graph.record(
        a.value + b.value,
        (a, b),
        lambda g: (_unbroadcast(g, a.shape), _unbroadcast(g, b.shape)),
    )


def sub(a, b) -> Node:
    graph = _graph_of(a, b)
    a, b = graph.lift(a), graph.lift(b)
    return graph.record(
        a.value - b.value,
        (a, b),
        lambda g: (_unbroadcast(g, a.shape), _unbroadcast(-g, b.shape)),
    )


def mul(a, b) -> Node:
    graph = _graph_of(a, b)
    a, b = graph.lift(a), graph.lift(b)
    return graph.record(
        a.value * b.value,
        (a, b),
        lambda g: (_unbroadcast(g * b.value, a.shape), _unbroadcast(g * a.value, b.shape)),
    )


def matmul(a, b) -> Node:
    """Matrix product over the last two axes, broadcasting leading axes."""
    graph = _graph_of(a, b)
    a, b = graph.lift(a), graph.lift(b)
    if a.value.ndim < 2 or b.value.ndim < 2 or a.shape[-1] != b.shape[-2]:
        raise DimensionError(
            f'Cannot multiply shapes {list(a.shape)} and {list(b.shape)}',
            details={'a': list(a.shape), 'b': list(b.shape)},
        )

    def backward(g):
        ga = g @ np.swapaxes(b.value, -1, -2)
        gb = np.swapaxes(a.value, -1, -2) @ g
        return _unbroadcast(ga, a.shape), _unbroadcast(gb, b.shape)

    return graph.record(np.matmul(a.value, b.value), (a, b), backward)


def transpose(a: Node, axes: tuple[int, ...] | None = None) -> Node:
    axes = tuple(reversed(range(a.value.ndim))) if axes is None else tuple(axes)
    inverse = tuple(np.argsort(axes))
    return a.graph.record(
        np.transpose(a.value, axes),
        (a,),
        lambda g: (np.transpose(g, inverse),),
    )


def reshape(a: Node, shape: tuple[int, ...]) -> Node:
    original = a.shape
    return a.graph.record(
        a.value.reshape(shape),
        (a,),
        lambda g: (g.reshape(original),),
    )


def sum(a: Node, axis: int | None = None, keepdims: bool = False) -> Node:  # noqa: A001
    original = a.shape

    def backward(g):
        if axis is not None and not keepdims:
            g = np.expand_dims(g, axis)
        return (np.broadcast_to(g, original).copy(),)

    return a.graph.record(np.sum(a.value, axis=axis, keepdims=keepdims), (a,), backward)


def mean(a: Node, axis: int | None = None, keepdims: bool = False) -> Node:
    count = a.value.size if axis is None else a.shape[axis]
    return mul(sum(a, axis=axis, keepdims=keepdims), 1.0 / count)


def take_rows(table: Node, ids: np.ndarray) -> Node:
    """Gather rows of a [V, d] table by integer ids of any shape."""
    ids = np.asarray(ids, dtype=np.int64)

    def backward(g):
        full = np.zeros_like(table.value)
        np.add.at(full, ids, g)
        return (full,)

    return table.graph.record(table.value[ids], (table,), backward)


def select(a: Node, key: Any) -> Node:
    """Index a node; the gradient scatters back into the source shape."""

    def backward(g):
        full = np.zeros_like(a.value)
        np.add.at(full, key, g)
        return (full,)

    return a.graph.record(np.array(a.value[key]), (a,), backward)


def scatter(base: Node, key: Any, values) -> Node:
    """Copy of `base` with `base[key]` replaced by `values` (broadcastable)."""
    graph = _graph_of(base, values)
    base, values = graph.lift(base), graph.lift(values)
    out = base.value.copy()
    target_shape = out[key].shape
    try:
        out[key] = np.broadcast_to(values.value, target_shape)
    except ValueError as e:
        raise DimensionError(
            f'Cannot place values of shape {list(values.shape)} into slots of shape {list(target_shape)}',
        ) from e

    def backward(g):
        g_base = g.copy()
        g_base[key] = 0.0
        g_values = _unbroadcast(np.array(g[key]), values.shape)
        return g_base, g_values

    return graph.record(out, (base, values), backward)


def softmax(a: Node, axis: int = -1) -> Node:
    y = T.softmax(a.value, axis=axis)

    def backward(g):
        return (y * (g - np.sum(g * y, axis=axis, keepdims=True)),)

    return a.graph.record(y, (a,), backward)


def log_softmax(a: Node, axis: int = -1) -> Node:
    y = T.log_softmax(a.value, axis=axis)
    p = np.exp(y)

    def backward(g):
        return (g - p * np.sum(g, axis=axis, keepdims=True),)

    return a.graph.record(y, (a,), backward)


def layernorm(x: Node, scale, shift, eps: float = 1e-10) -> Node:
    """Normalize over the last axis, then apply the learned scale/shift."""
    graph = _graph_of(x, scale, shift)
    x, scale, shift = graph.lift(x), graph.lift(scale), graph.lift(shift)
    T._check_axis(x.value)
    mu = np.mean(x.value, axis=-1, keepdims=True)
    centered = x.value - mu
    inv_std = 1.0 / np.sqrt(np.mean(centered * centered, axis=-1, keepdims=True) + eps)
    xhat = centered * inv_std
    out = xhat * scale.value + shift.value

    def backward(g):
        dxhat = g * scale.value
        dx = inv_std * (
            dxhat
            - np.mean(dxhat, axis=-1, keepdims=True)
            - xhat * np.mean(dxhat * xhat, axis=-1, keepdims=True)
        )
        return dx, _unbroadcast(g * xhat, scale.shape), _unbroadcast(g, shift.shape)

    return graph.record(out, (x, scale, shift), backward)


def gelu(x: Node) -> Node:
    return x.graph.record(
        T.gelu(x.value),
        (x,),
        lambda g: (g * T.gelu_grad(x.value),),
    )


def softplus(x: Node) -> Node:
    value = np.logaddexp(0.0, x.value)
    return x.graph.record(
        value,
        (x,),
        lambda g: (g / (1.0 + np.exp(-x.value)),),
    )


def cross_entropy(logits: Node, targets, weights: np.ndarray | None = None) -> Node:
    """Weighted mean of -log softmax(logits)[target] over target positions.

    `logits` is [..., V] and `targets` an integer array of shape [...]; zero
    weights drop positions (padding).
    """
    targets = np.asarray(targets, dtype=np.int64)
    logp = T.log_softmax(logits.value)
    if targets.shape != logits.shape[:-1]:
        raise DimensionError(
            f'Targets {list(targets.shape)} do not match logits {list(logits.shape)}',
        )
    w = np.ones(targets.shape) if weights is None else np.asarray(weights, dtype=np.float64)
    total = float(np.sum(w))
    if total <= 0.0:
        raise ContractError('cross_entropy needs at least one weighted position')
    picked = np.take_along_axis(logp, targets[..., None], axis=-1)[..., 0]
    loss = -np.sum(w * picked) / total

    def backward(g):
        probs = np.exp(logp)
        onehot = np.zeros_like(probs)
        np.put_along_axis(onehot, targets[..., None], 1.0, axis=-1)
        return (g * (probs - onehot) * (w / total)[..., None],)

    return logits.graph.record(np.asarray(loss), (logits,), backward)
