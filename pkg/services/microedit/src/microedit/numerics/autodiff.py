"""Reverse-mode differentiation over an explicitly recorded tape."""
from __future__ import annotations

from collections.abc import Callable
from collections.abc import Mapping
from collections.abc import Sequence

import numpy as np
from microedit.shared.exception import ContractError

BackwardFn = Callable[[np.ndarray], Sequence[np.ndarray | None]]


class Node:
    """One value on the tape: a leaf, a constant, or a recorded primitive."""

    __slots__ = ('graph', 'value', 'parents', 'backward_fn', 'requires_grad', 'name', 'index')

    def __init__(
        self,
        graph: Graph,
        value: np.ndarray,
        parents: tuple[Node, ...] = (),
        backward_fn: BackwardFn | None = None,
        requires_grad: bool = False,
        name: str | None = None,
    ):
        self.graph = graph
        self.value = value
        self.parents = parents
        self.backward_fn = backward_fn
        self.requires_grad = requires_grad
        self.name = name
        self.index = -1

    @property
    def shape(self) -> tuple[int, ...]:
        return self.value.shape

    def __repr__(self) -> str:
        label = self.name or 'node'
        return f'Node({label}, shape={list(self.shape)}, grad={self.requires_grad})'

    # Operators delegate to the primitive ops so every path is recorded.
    def __add__(self, other):
        from . import ops
        return ops.add(self, other)

    def __radd__(self, other):
        from . import ops
        return ops.add(other, self)

    def __sub__(self, other):
        from . import ops
        return ops.sub(self, other)

    def __rsub__(self, other):
        from . import ops
        return ops.sub(other, self)

    def __mul__(self, other):
        from . import ops
        return ops.mul(self, other)

    def __rmul__(self, other):
        from . import ops
        return ops.mul(other, self)

    def __neg__(self):
        from . import ops
        return ops.mul(self, -1.0)

    def __matmul__(self, other):
        from . import ops
        return ops.matmul(self, other)


class Graph:
    """Tape of nodes in creation order, which is a topological order."""

    def __init__(self):
        self.nodes: list[Node] = []

    def _append(self, node: Node) -> Node:
        node.index = len(self.nodes)
        self.nodes.append(node)
        return node

    def leaf(self, value: np.ndarray, name: str | None = None) -> Node:
        """A differentiable input (parameter or payload)."""
        value = np.array(value, dtype=np.float64)
        return self._append(Node(self, value, requires_grad=True, name=name))

    def constant(self, value: np.ndarray, name: str | None = None) -> Node:
        value = np.asarray(value, dtype=np.float64)
        return self._append(Node(self, value, requires_grad=False, name=name))

    def lift(self, value: Node | np.ndarray | float) -> Node:
        if isinstance(value, Node):
            if value.graph is not self:
                raise ContractError('Node belongs to a different graph')
            return value
        return self.constant(value)

    def record(self, value: np.ndarray, parents: Sequence[Node], backward_fn: BackwardFn) -> Node:
        parents = tuple(parents)
        requires_grad = any(p.requires_grad for p in parents)
        return self._append(
            Node(
                self,
                value,
                parents=parents if requires_grad else (),
                backward_fn=backward_fn if requires_grad else None,
                requires_grad=requires_grad,
            ),
        )

    def backward(self, loss: Node) -> dict[int, np.ndarray]:
        """Accumulate d(loss)/d(node) for every node reachable from `loss`.

        Nodes are visited once each, in reverse tape order.

        Raises:
            ContractError: loss is not a scalar.
        """
        if loss.graph is not self:
            raise ContractError('Loss node belongs to a different graph')
        if loss.value.size != 1:
            raise ContractError(
                f'Loss must be scalar, got shape {list(loss.value.shape)}',
            )
        grads: dict[int, np.ndarray] = {loss.index: np.ones_like(loss.value)}
        for node in reversed(self.nodes[: loss.index + 1]):
            upstream = grads.pop(node.index, None) if node.backward_fn is not None else grads.get(node.index)
            if upstream is None or node.backward_fn is None:
                continue
            parent_grads = node.backward_fn(upstream)
            for parent, g in zip(node.parents, parent_grads):
                if g is None or not parent.requires_grad:
                    continue
                if parent.index in grads:
                    grads[parent.index] = grads[parent.index] + g
                else:
                    grads[parent.index] = g
        return grads


def grad(loss: Node, wrt: Mapping[str, Node]) -> dict[str, np.ndarray]:
    """d(loss)/d(p) for every named parameter node.

    A parameter that did not take part in the graph gets a zero gradient.
    """
    grads = loss.graph.backward(loss)
    result: dict[str, np.ndarray] = {}
    for name, node in wrt.items():
        g = grads.get(node.index) if node.graph is loss.graph else None
        result[name] = np.zeros_like(node.value) if g is None else np.array(g, dtype=np.float64).reshape(node.value.shape)
    return result
