from __future__ import annotations

from . import ops
from .autodiff import Graph
from .autodiff import Node
from .autodiff import grad
from .prng import make_rng
from .tensor import Tensor
from .tensor import as_tensor
from .tensor import cosine
from .tensor import cross_entropy
from .tensor import gelu
from .tensor import layernorm
from .tensor import log_softmax
from .tensor import matmul
from .tensor import softmax
from .tensor import solve_spd

__all__ = [
    'Graph',
    'Node',
    'Tensor',
    'as_tensor',
    'cosine',
    'cross_entropy',
    'gelu',
    'grad',
    'layernorm',
    'log_softmax',
    'make_rng',
    'matmul',
    'ops',
    'softmax',
    'solve_spd',
]
