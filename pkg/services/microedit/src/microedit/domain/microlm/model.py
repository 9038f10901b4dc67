"""The editable pre-layernorm causal decoder and its named-weight state."""
from __future__ import annotations

import hashlib
from collections.abc import Iterable
from collections.abc import Sequence

import numpy as np
from base import CustomBaseModel
from logger import get_logger
from microedit.domain.factworld import END
from microedit.numerics import Graph
from microedit.numerics import Node
from microedit.numerics import make_rng
from microedit.numerics import ops
from microedit.numerics import softmax
from microedit.shared.exception import AddressError
from microedit.shared.exception import ContractError
from microedit.shared.exception import DimensionError
from microedit.shared.exception import LengthError
from microedit.shared.exception import ShapeError
from microedit.shared.exception import TokenError

from .addressing import hook_sites
from .addressing import resolve_address
from .addressing import weight_addresses
from .addressing import weight_shape
from .models import Checkpoint
from .models import ForwardResult
from .models import HookMode
from .models import HookSpec
from .models import ModelConfig
from .tokenizer import Vocabulary

logger = get_logger(__name__)

MASK_VALUE = -1e30

TokenInput = Sequence[str] | Sequence[int] | np.ndarray


class ModelState(CustomBaseModel):
    config: ModelConfig
    weights: dict[str, np.ndarray]
    vocab: Vocabulary

    @classmethod
    def initialize(cls, config: ModelConfig, vocab: Vocabulary, seed: int, init_std: float = 0.02) -> ModelState:
        if config.vocab_size != len(vocab):
            raise ShapeError(
                f'Config vocab_size {config.vocab_size} does not match vocabulary of {len(vocab)} tokens',
            )
        if config.d_model % config.n_heads:
            raise ShapeError(f'd_model={config.d_model} is not divisible by n_heads={config.n_heads}')
        weights: dict[str, np.ndarray] = {}
        for address in weight_addresses(config):
            shape = weight_shape(config, address)
            if address.endswith('.scale'):
                weights[address] = np.ones(shape)
            elif address.endswith('.shift'):
                weights[address] = np.zeros(shape)
            else:
                rng = make_rng(seed, 'microlm', 'init', address)
                weights[address] = rng.normal(0.0, init_std, size=shape)
        logger.info(
            'Initialized micro language model',
            extra={'n_layers': config.n_layers, 'd_model': config.d_model, 'vocab_size': config.vocab_size},
        )
        return cls(config=config, weights=weights, vocab=vocab)

    def addresses(self) -> list[str]:
        return weight_addresses(self.config)

    def get_weights(self, address: str) -> np.ndarray:
        return self.weights[resolve_address(self.config, address)].copy()

    def set_weights(self, address: str, value: np.ndarray) -> None:
        address = resolve_address(self.config, address)
        value = np.array(value, dtype=np.float64)
        if value.shape != self.weights[address].shape:
            raise ShapeError(
                f'Weight {address} expects shape {list(self.weights[address].shape)}, got {list(value.shape)}',
            )
        self.weights[address] = value

    def snapshot(self) -> Checkpoint:
        return Checkpoint(config=self.config, weights={k: v.copy() for k, v in self.weights.items()})

    def restore(self, checkpoint: Checkpoint) -> None:
        if checkpoint.config != self.config:
            raise ShapeError(
                'Checkpoint config does not match the model config',
                details={'checkpoint': checkpoint.config.model_dump(), 'model': self.config.model_dump()},
            )
        self.weights = {k: v.copy() for k, v in checkpoint.weights.items()}

    def fingerprint(self) -> str:
        digest = hashlib.sha256()
        for address in self.addresses():
            digest.update(address.encode('utf-8'))
            digest.update(np.ascontiguousarray(self.weights[address], dtype='<f8').tobytes())
        return digest.hexdigest()

    def parameters(self, graph: Graph, trainable: Iterable[str] = ()) -> dict[str, Node]:
        """Leaf nodes for the trainable addresses on `graph`."""
        return {
            address: graph.leaf(self.weights[address], name=address)
            for address in (resolve_address(self.config, a) for a in trainable)
        }


def encode_tokens(state: ModelState, tokens: TokenInput) -> tuple[np.ndarray, bool]:
    if isinstance(tokens, np.ndarray) and tokens.dtype.kind in 'iu':
        ids = tokens.astype(np.int64)
    elif len(tokens) and all(isinstance(t, str) for t in tokens):
        ids = state.vocab.encode(tokens)
    else:
        ids = np.asarray(tokens, dtype=np.int64)
    batched = ids.ndim == 2
    if not batched:
        ids = ids.reshape(1, -1)
    if ids.shape[-1] == 0:
        raise ContractError('Token sequence is empty')
    if ids.shape[-1] > state.config.context_len:
        raise LengthError(
            f'Sequence of {ids.shape[-1]} tokens exceeds context length {state.config.context_len}',
            details={'length': int(ids.shape[-1]), 'context_len': state.config.context_len},
        )
    if ids.min() < 0 or ids.max() >= state.config.vocab_size:
        raise TokenError('Token id out of vocabulary range')
    return ids, batched


class _HookTable:
    def __init__(self, hooks: Sequence[HookSpec], sites: set[str], batch: int, length: int):
        self.batch = batch
        self.length = length
        self.by_address: dict[str, list[HookSpec]] = {}
        self.captures: dict[tuple[str, int], np.ndarray] = {}
        self.input_captures: dict[tuple[str, int], np.ndarray] = {}
        for hook in hooks:
            if hook.address not in sites:
                raise AddressError(f'Unresolved hook address {hook.address!r}', details={'address': hook.address})
            if hook.mode == HookMode.CAPTURE_INPUT and hook.address == 'embed':
                raise ContractError('The embed site has no activation input to capture')
            self.by_address.setdefault(hook.address, []).append(hook)

    def positions(self, hook: HookSpec) -> list[int]:
        if hook.token_positions is None:
            return list(range(self.length))
        resolved = []
        for p in hook.token_positions:
            q = p + self.length if p < 0 else p
            if not 0 <= q < self.length:
                raise ContractError(f'Hook position {p} outside sequence of length {self.length}')
            resolved.append(q)
        return resolved

    def _capture(self, store: dict, address: str, value: np.ndarray, positions: list[int], batched: bool) -> None:
        for p in positions:
            row = value[:, p].copy()
            store[(address, p)] = row if batched else row[0]

    def _check_payload(self, hook: HookSpec, target_shape: tuple[int, ...]) -> None:
        payload = hook.payload
        shape = payload.shape if isinstance(payload, Node) else np.shape(payload)
        if tuple(shape) not in (tuple(target_shape), tuple(target_shape[1:])):
            raise DimensionError(
                f'Hook payload shape {list(shape)} does not match activation slice {list(target_shape[1:])} at {hook.address}',
            )

    def apply(self, address: str, x_in: Node, fn, batched: bool) -> Node:
        hooks = self.by_address.get(address)
        if not hooks:
            return fn(x_in)
        for hook in hooks:
            if hook.mode == HookMode.CAPTURE_INPUT:
                self._capture(self.input_captures, address, x_in.value, self.positions(hook), batched)
        out = fn(x_in)
        for hook in hooks:
            if hook.mode == HookMode.CAPTURE_INPUT:
                continue
            positions = self.positions(hook)
            key = (slice(None), positions)
            if hook.mode == HookMode.CAPTURE_OUTPUT:
                self._capture(self.captures, address, out.value, positions, batched)
            elif hook.mode == HookMode.REPLACE_OUTPUT:
                self._check_payload(hook, out.value[key].shape)
                out = ops.scatter(out, key, hook.payload)
            elif hook.mode == HookMode.ADD_TO_OUTPUT:
                self._check_payload(hook, out.value[key].shape)
                out = ops.scatter(out, key, ops.add(ops.select(out, key), hook.payload))
        return out


def causal_mask(length: int) -> np.ndarray:
    return np.triu(np.full((length, length), MASK_VALUE), k=1)


def forward(
    state: ModelState,
    tokens: TokenInput,
    hooks: Sequence[HookSpec] | None = None,
    *,
    graph: Graph | None = None,
    params: dict[str, Node] | None = None,
    exit_layer: int | None = None,
) -> ForwardResult:
    """
    Run the decoder over one sequence ([T]) or a batch ([B, T]).

    Args:
        state (ModelState): the model
        tokens: words or token ids
        hooks (list[HookSpec]): applied in declaration order at their sites
        graph (Graph): tape to record on; a private one is used when omitted
        params (dict[str, Node]): differentiable weight nodes overriding stored weights
        exit_layer (int): read logits after this block (negative counts from the end)

    Returns:
        ForwardResult: logits plus activations captured by the hooks

    Raises:
        TokenError, LengthError, AddressError
    """
    cfg = state.config
    ids, batched = encode_tokens(state, tokens)
    batch, length = ids.shape
    graph = graph or Graph()
    params = params or {}
    table = _HookTable(hooks or [], set(hook_sites(cfg)), batch, length)

    n_run = cfg.n_layers
    if exit_layer is not None:
        layer = exit_layer + cfg.n_layers if exit_layer < 0 else exit_layer
        if not 0 <= layer < cfg.n_layers:
            raise ContractError(f'exit_layer {exit_layer} outside [0, {cfg.n_layers})')
        n_run = layer + 1

    nodes: dict[str, Node] = {}

    def w(address: str) -> Node:
        if address in params:
            return params[address]
        if address not in nodes:
            nodes[address] = graph.constant(state.weights[address], name=address)
        return nodes[address]

    def linear(address: str):
        return lambda x: ops.matmul(x, ops.transpose(w(address)))

    n_heads, d_head = cfg.n_heads, cfg.d_head
    mask = causal_mask(length)
    scale = 1.0 / np.sqrt(d_head)

    def split_heads(x: Node) -> Node:
        return ops.transpose(ops.reshape(x, (batch, length, n_heads, d_head)), (0, 2, 1, 3))

    def embed(_):
        tok = ops.take_rows(w('embed'), ids)
        pos = ops.select(w('pos_embed'), slice(0, length))
        return ops.add(tok, pos)

    h = table.apply('embed', None, embed, batched)
    for i in range(n_run):
        prefix = f'blocks.{i}'

        def block(x, prefix=prefix):
            a = table.apply(
                f'{prefix}.ln1', x,
                lambda y: ops.layernorm(y, w(f'{prefix}.ln1.scale'), w(f'{prefix}.ln1.shift'), cfg.layernorm_eps),
                batched,
            )
            q = table.apply(f'{prefix}.attn.q', a, linear(f'{prefix}.attn.q'), batched)
            k = table.apply(f'{prefix}.attn.k', a, linear(f'{prefix}.attn.k'), batched)
            v = table.apply(f'{prefix}.attn.v', a, linear(f'{prefix}.attn.v'), batched)
            scores = ops.matmul(split_heads(q), ops.transpose(split_heads(k), (0, 1, 3, 2)))
            probs = ops.softmax(ops.add(ops.mul(scores, scale), mask))
            merged = ops.reshape(ops.transpose(ops.matmul(probs, split_heads(v)), (0, 2, 1, 3)), (batch, length, cfg.d_model))
            x = ops.add(x, table.apply(f'{prefix}.attn.o', merged, linear(f'{prefix}.attn.o'), batched))
            m = table.apply(
                f'{prefix}.ln2', x,
                lambda y: ops.layernorm(y, w(f'{prefix}.ln2.scale'), w(f'{prefix}.ln2.shift'), cfg.layernorm_eps),
                batched,
            )
            up = table.apply(f'{prefix}.mlp.up', m, linear(f'{prefix}.mlp.up'), batched)
            act = table.apply(f'{prefix}.mlp.act', up, ops.gelu, batched)
            down = table.apply(f'{prefix}.mlp.down', act, linear(f'{prefix}.mlp.down'), batched)
            return ops.add(x, down)

        h = table.apply(prefix, h, block, batched)

    f = table.apply(
        'ln_f', h,
        lambda y: ops.layernorm(y, w('ln_f.scale'), w('ln_f.shift'), cfg.layernorm_eps),
        batched,
    )
    logits = table.apply('unembed', f, linear('unembed'), batched)
    return ForwardResult(
        logits=logits.value if batched else logits.value[0],
        logits_node=logits,
        captures=table.captures,
        input_captures=table.input_captures,
    )


def next_token_probs(state: ModelState, tokens: TokenInput, hooks: Sequence[HookSpec] | None = None) -> np.ndarray:
    return softmax(forward(state, tokens, hooks).logits[-1])


def truncate_at_end(tokens: Sequence[str]) -> list[str]:
    tokens = list(tokens)
    if END in tokens:
        return tokens[: tokens.index(END)]
    return tokens


def generate_greedy(
    state: ModelState,
    prompt: TokenInput,
    max_new: int,
    hooks: Sequence[HookSpec] | None = None,
    stop_at_end: bool = True,
) -> list[str]:
    """Append argmax tokens (lowest id on ties) until `<end>` or `max_new`.

    Raises:
        LengthError: prompt plus `max_new` does not fit the context
    """
    ids = [int(i) for i in encode_tokens(state, prompt)[0][0]]
    if max_new < 0:
        raise ContractError('max_new must be non-negative')
    if len(ids) + max_new > state.config.context_len:
        raise LengthError(
            f'Prompt of {len(ids)} tokens leaves no headroom for {max_new} new tokens',
            details={'prompt': len(ids), 'max_new': max_new, 'context_len': state.config.context_len},
        )
    end_id = state.vocab.end_id
    generated: list[int] = []
    for _ in range(max_new):
        logits = forward(state, ids, hooks).logits[-1]
        token = int(np.argmax(logits))
        ids.append(token)
        generated.append(token)
        if stop_at_end and token == end_id:
            break
    return state.vocab.decode(generated)


def answer(state: ModelState, prompt: TokenInput, max_new: int = 4, hooks: Sequence[HookSpec] | None = None) -> list[str]:
    """Greedy continuation truncated at the end token."""
    return truncate_at_end(generate_greedy(state, prompt, max_new, hooks))


def answer_matches(state: ModelState, prompt: TokenInput, expected: Sequence[str], max_new: int = 4) -> bool:
    return answer(state, prompt, max_new) == list(expected)


def clone_state(state: ModelState) -> ModelState:
    return ModelState(config=state.config, weights={k: v.copy() for k, v in state.weights.items()}, vocab=state.vocab)


def weights_equal(a: ModelState | Checkpoint, b: ModelState | Checkpoint) -> bool:
    """Bitwise equality of every weight tensor."""
    if a.weights.keys() != b.weights.keys():
        return False
    return all(np.array_equal(a.weights[k], b.weights[k]) for k in a.weights)


def changed_addresses(before: Checkpoint, after: ModelState) -> list[str]:
    return [k for k in before.weights if not np.array_equal(before.weights[k], after.weights[k])]

