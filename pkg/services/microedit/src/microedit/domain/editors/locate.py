"""Building blocks of the locate-then-edit methods: keys, key statistics, values and the rank-one solve."""
from __future__ import annotations

from collections.abc import Callable

import numpy as np
from logger import get_logger
from microedit.domain.factworld import EditRequest
from microedit.domain.factworld import PAD
from microedit.domain.factworld import SPECIALS
from microedit.domain.microlm import HookMode
from microedit.domain.microlm import HookSpec
from microedit.domain.microlm import ModelState
from microedit.domain.microlm import forward
from microedit.numerics import Graph
from microedit.numerics import grad
from microedit.numerics import make_rng
from microedit.numerics import ops
from microedit.numerics import solve_spd
from microedit.shared.exception import ContractError
from microedit.shared.exception import DivergenceError
from microedit.shared.exception import EditFailure
from microedit.shared.exception import SingularityError

from .context import EditContext
from .context import PreparedRequest
from .context import request_nll

logger = get_logger(__name__)

BATCH = 32


def pad_batch(model: ModelState, sequences: list[list[str]]) -> np.ndarray:
    width = max(len(s) for s in sequences)
    pad_id = model.vocab.id(PAD)
    ids = np.full((len(sequences), width), pad_id, dtype=np.int64)
    for row, seq in enumerate(sequences):
        ids[row, : len(seq)] = model.vocab.encode(seq)
    return ids


def prefixed_contexts(context: EditContext, request: EditRequest, n_prefix: int, context_len: int) -> list[tuple[list[str], int]]:
    """The bare edit prompt plus up to `n_prefix` corpus-sampled prefixes, with the subject-last position."""
    prompt = list(request.edit_prompt)
    subject_last = request.subject_span[1] - 1
    contexts = [(prompt, subject_last)]
    if not context.corpus:
        return contexts
    rng = make_rng(context.seed, 'rome-prefix', request.key)
    for _ in range(n_prefix):
        item = context.corpus[int(rng.integers(len(context.corpus)))]
        length = int(rng.integers(1, 6))
        prefix = [t for t in item[:length] if t not in SPECIALS]
        if not prefix or len(prefix) + len(prompt) > context_len:
            continue
        contexts.append((prefix + prompt, len(prefix) + subject_last))
    return contexts


def compute_key(model: ModelState, context: EditContext, request: EditRequest, layer: int, n_prefix: int) -> np.ndarray:
    """Mean input of `blocks.<layer>.mlp.down` at the subject's last token over the prefixed contexts."""
    address = f'blocks.{layer}.mlp.down'
    contexts = prefixed_contexts(context, request, n_prefix, model.config.context_len)
    ids = pad_batch(model, [tokens for tokens, _ in contexts])
    positions = sorted({pos for _, pos in contexts})
    result = forward(model, ids, [HookSpec(address=address, mode=HookMode.CAPTURE_INPUT, token_positions=positions)])
    keys = [result.input_captures[(address, pos)][row] for row, (_, pos) in enumerate(contexts)]
    return np.mean(np.stack(keys), axis=0)


def second_moment(model: ModelState, context: EditContext, layer: int, n_samples: int) -> np.ndarray:
    """(1/n) sum k k^T over `n_samples` corpus token positions; cached per layer and sample size."""
    address = f'blocks.{layer}.mlp.down'
    cache_key = (address, n_samples)
    if cache_key in context.second_moments:
        return context.second_moments[cache_key]
    if not context.corpus:
        raise EditFailure('Key statistics need a training corpus', details={'address': address})

    rng = make_rng(context.seed, 'rome-covariance', address)
    order = rng.permutation(len(context.corpus)).tolist()
    rows: list[np.ndarray] = []
    for start in range(0, len(order), BATCH):
        batch = [context.corpus[i][: model.config.context_len] for i in order[start: start + BATCH]]
        ids = pad_batch(model, batch)
        result = forward(model, ids, [HookSpec(address=address, mode=HookMode.CAPTURE_INPUT)])
        for row, seq in enumerate(batch):
            rows.extend(result.input_captures[(address, p)][row] for p in range(len(seq)))
        if len(rows) >= n_samples:
            break
    keys = np.stack(rows[:n_samples])
    moment = keys.T @ keys / len(keys)
    context.second_moments[cache_key] = moment
    logger.info('Estimated key second moment', extra={'address': address, 'positions': len(keys)})
    return moment


def covariance(moment: np.ndarray, ridge: float) -> np.ndarray:
    return moment + ridge * float(np.mean(np.diag(moment))) * np.eye(moment.shape[0])


def with_ridge_retry(solve: Callable[[float], tuple], ridge: float, address: str):
    """Run `solve(ridge)`; on a singular system retry once with ten times the ridge."""
    try:
        return solve(ridge), ridge
    except SingularityError:
        logger.warning('Singular key covariance, retrying with a larger ridge', extra={'address': address, 'ridge': ridge * 10})
    try:
        return solve(ridge * 10), ridge * 10
    except SingularityError as e:
        raise EditFailure(
            f'Key covariance at {address} is singular after ridge retry',
            details={'address': address, 'ridge': ridge * 10},
        ) from e


def optimize_value(
    model: ModelState,
    prepared: PreparedRequest,
    address: str,
    position: int,
    v0: np.ndarray,
    steps: int,
    lr: float,
    beta: float = 0.0,
    exit_layer: int | None = None,
) -> tuple[np.ndarray, list[float]]:
    """
    Gradient descent on the vector substituted for the output of `address` at
    `position`, minimizing the target NLL plus beta * ||v - v0||^2.

    Raises:
        DivergenceError: the loss became non-finite
    """
    v = v0.astype(np.float64).copy()
    losses: list[float] = []
    for step in range(steps):
        graph = Graph()
        v_node = graph.leaf(v[None, :], name='value')
        hook = HookSpec(address=address, mode=HookMode.REPLACE_OUTPUT, token_positions=[position], payload=v_node)
        loss = request_nll(model, prepared, [hook], graph=graph, exit_layer=exit_layer)
        if beta:
            diff = ops.sub(v_node, v0[None, :])
            loss = ops.add(loss, ops.mul(ops.sum(ops.mul(diff, diff)), beta))
        value = float(loss.value)
        if not np.isfinite(value):
            raise DivergenceError(
                f'Value optimization diverged at step {step}',
                details={'address': address, 'step': step},
                last_good=v,
            )
        losses.append(value)
        v = v - lr * grad(loss, {'v': v_node})['v'][0]
    return v, losses


def rank_one_update(W: np.ndarray, C: np.ndarray, k: np.ndarray, v: np.ndarray) -> tuple[np.ndarray, np.ndarray]:
    """
    W' = W + (v - W k) u^T with u = C^-1 k / (k^T C^-1 k), so that W' k = v.

    Returns:
        (W', u)

    Raises:
        SingularityError: C is not positive definite
    """
    if W.shape != (v.shape[0], k.shape[0]):
        raise ContractError(f'Rank-one update shapes disagree: W {list(W.shape)}, k {list(k.shape)}, v {list(v.shape)}')
    c_inv_k = solve_spd(C, k)
    u = c_inv_k / float(k @ c_inv_k)
    return W + np.outer(v - W @ k, u), u
