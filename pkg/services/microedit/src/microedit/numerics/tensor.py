"""Dense float64 kernels shared by the tape ops and by plain inference code."""
from __future__ import annotations

from collections.abc import Sequence

import numpy as np
from logger import get_logger
from microedit.shared.exception import ContractError
from microedit.shared.exception import DimensionError
from microedit.shared.exception import SingularityError
from scipy import linalg
from scipy import special

logger = get_logger(__name__)

Tensor = np.ndarray

SQRT_HALF = np.sqrt(0.5)
INV_SQRT_2PI = 1.0 / np.sqrt(2.0 * np.pi)
SOLVE_RESIDUAL_BOUND = 1e-8


def as_tensor(data: Sequence | np.ndarray | float, shape: Sequence[int] | None = None) -> Tensor:
    """Build a float64 tensor, optionally reshaping a flat row-major buffer."""
    array = np.array(data, dtype=np.float64)
    if shape is not None:
        shape = tuple(int(s) for s in shape)
        if int(np.prod(shape)) != array.size:
            raise ContractError(
                f'Shape {list(shape)} does not match {array.size} values',
                details={'shape': list(shape), 'size': array.size},
            )
        array = array.reshape(shape)
    return array


def matmul(a: Tensor, b: Tensor) -> Tensor:
    """Matrix product of a [m,k] and a [k,n] tensor."""
    a = np.asarray(a, dtype=np.float64)
    b = np.asarray(b, dtype=np.float64)
    if a.ndim != 2 or b.ndim != 2 or a.shape[1] != b.shape[0]:
        raise DimensionError(
            f'Cannot multiply shapes {list(a.shape)} and {list(b.shape)}',
            details={'a': list(a.shape), 'b': list(b.shape)},
        )
    return a @ b


def solve_spd(A: Tensor, b: Tensor) -> Tensor:
    """Solve A x = b for symmetric positive definite A through Cholesky.

    Raises:
        SingularityError: the factorization hit a non-positive pivot or the
            residual bound was not met. Callers retry with a ridge term.
    """
    A = np.asarray(A, dtype=np.float64)
    b = np.asarray(b, dtype=np.float64)
    if A.ndim != 2 or A.shape[0] != A.shape[1]:
        raise DimensionError(f'solve_spd needs a square matrix, got {list(A.shape)}')
    if b.ndim not in (1, 2) or b.shape[0] != A.shape[0]:
        raise DimensionError(
            f'Cannot solve {list(A.shape)} against right-hand side {list(b.shape)}',
            details={'A': list(A.shape), 'b': list(b.shape)},
        )
    if not np.all(np.isfinite(A)) or not np.all(np.isfinite(b)):
        raise SingularityError('solve_spd received non-finite input')
    try:
        factor = linalg.cho_factor(A, lower=True, check_finite=False)
    except linalg.LinAlgError as e:
        raise SingularityError(f'Matrix is not positive definite: {e}') from e
    x = linalg.cho_solve(factor, b, check_finite=False)
    residual = np.max(np.abs(A @ x - b)) / (np.max(np.abs(b), initial=0.0) + 1.0)
    if not np.isfinite(residual) or residual >= SOLVE_RESIDUAL_BOUND:
        raise SingularityError(
            'Cholesky solve missed the residual bound',
            details={'residual': float(residual)},
        )
    return x


def _check_axis(x: Tensor, axis: int = -1) -> None:
    if x.ndim == 0 or x.shape[axis] == 0:
        raise ContractError(f'Empty reduction axis for shape {list(x.shape)}')


def softmax(x: Tensor, axis: int = -1) -> Tensor:
    x = np.asarray(x, dtype=np.float64)
    _check_axis(x, axis)
    shifted = x - np.max(x, axis=axis, keepdims=True)
    e = np.exp(shifted)
    return e / np.sum(e, axis=axis, keepdims=True)


def log_softmax(x: Tensor, axis: int = -1) -> Tensor:
    x = np.asarray(x, dtype=np.float64)
    _check_axis(x, axis)
    shifted = x - np.max(x, axis=axis, keepdims=True)
    return shifted - np.log(np.sum(np.exp(shifted), axis=axis, keepdims=True))


def layernorm(x: Tensor, scale: Tensor, shift: Tensor, eps: float = 1e-10) -> Tensor:
    x = np.asarray(x, dtype=np.float64)
    _check_axis(x)
    mean = np.mean(x, axis=-1, keepdims=True)
    centered = x - mean
    var = np.mean(centered * centered, axis=-1, keepdims=True)
    return centered / np.sqrt(var + eps) * scale + shift


def gelu(x: Tensor) -> Tensor:
    """Exact GELU, x * Phi(x)."""
    x = np.asarray(x, dtype=np.float64)
    return 0.5 * x * (1.0 + special.erf(x * SQRT_HALF))


def gelu_grad(x: Tensor) -> Tensor:
    cdf = 0.5 * (1.0 + special.erf(x * SQRT_HALF))
    pdf = INV_SQRT_2PI * np.exp(-0.5 * x * x)
    return cdf + x * pdf


def cross_entropy(logits: Tensor, target: int | Tensor) -> float | Tensor:
    """-log softmax(logits)[target] along the last axis."""
    logp = log_softmax(logits)
    target = np.asarray(target, dtype=np.int64)
    picked = np.take_along_axis(logp, target[..., None], axis=-1)[..., 0]
    return -picked


def cosine(a: Tensor, b: Tensor) -> float:
    na = float(np.linalg.norm(a))
    nb = float(np.linalg.norm(b))
    if na == 0.0 or nb == 0.0:
        return 0.0
    return float(np.dot(a, b) / (na * nb))
