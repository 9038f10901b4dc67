"""Binary checkpoint format.

Layout (little-endian): magic `MELM`, u32 format version, config block
(six u32 sizes and the f64 layernorm epsilon), vocabulary block (u32 count,
then length-prefixed UTF-8 tokens), u32 record count, then per address a
length-prefixed path, u32 rank, rank u32 dims and the f64 payload.
"""
from __future__ import annotations

import struct
from pathlib import Path

import numpy as np
from logger import get_logger
from microedit.shared.exception import CheckpointError

from .model import ModelState
from .models import ModelConfig
from .tokenizer import Vocabulary

logger = get_logger(__name__)

MAGIC = b'MELM'
VERSION = 1
_CONFIG = struct.Struct('<6Id')


def _pack_str(text: str) -> bytes:
    raw = text.encode('utf-8')
    return struct.pack('<I', len(raw)) + raw


class _Reader:
    def __init__(self, data: bytes):
        self.data = data
        self.offset = 0

    def take(self, n: int) -> bytes:
        if self.offset + n > len(self.data):
            raise CheckpointError('Checkpoint is truncated', details={'offset': self.offset})
        chunk = self.data[self.offset: self.offset + n]
        self.offset += n
        return chunk

    def u32(self) -> int:
        return struct.unpack('<I', self.take(4))[0]

    def string(self) -> str:
        return self.take(self.u32()).decode('utf-8')


def dumps_checkpoint(state: ModelState) -> bytes:
    cfg = state.config
    parts = [
        MAGIC,
        struct.pack('<I', VERSION),
        _CONFIG.pack(cfg.n_layers, cfg.d_model, cfg.n_heads, cfg.d_mlp, cfg.vocab_size, cfg.context_len, cfg.layernorm_eps),
        struct.pack('<I', len(state.vocab)),
    ]
    parts.extend(_pack_str(token) for token in state.vocab.tokens)
    addresses = state.addresses()
    parts.append(struct.pack('<I', len(addresses)))
    for address in addresses:
        tensor = state.weights[address]
        parts.append(_pack_str(address))
        parts.append(struct.pack(f'<I{tensor.ndim}I', tensor.ndim, *tensor.shape))
        parts.append(np.ascontiguousarray(tensor, dtype='<f8').tobytes())
    return b''.join(parts)


def loads_checkpoint(data: bytes) -> ModelState:
    reader = _Reader(data)
    if reader.take(4) != MAGIC:
        raise CheckpointError('Not a checkpoint file (bad magic bytes)')
    version = reader.u32()
    if version != VERSION:
        raise CheckpointError(f'Unsupported checkpoint version {version}', details={'version': version})
    n_layers, d_model, n_heads, d_mlp, vocab_size, context_len, eps = _CONFIG.unpack(reader.take(_CONFIG.size))
    config = ModelConfig(
        n_layers=n_layers,
        d_model=d_model,
        n_heads=n_heads,
        d_mlp=d_mlp,
        vocab_size=vocab_size,
        context_len=context_len,
        layernorm_eps=eps,
    )
    vocab = Vocabulary(tokens=[reader.string() for _ in range(reader.u32())])
    weights: dict[str, np.ndarray] = {}
    for _ in range(reader.u32()):
        address = reader.string()
        rank = reader.u32()
        dims = struct.unpack(f'<{rank}I', reader.take(4 * rank))
        count = int(np.prod(dims)) if rank else 1
        payload = np.frombuffer(reader.take(8 * count), dtype='<f8')
        weights[address] = payload.astype(np.float64).reshape(dims)
    if reader.offset != len(data):
        raise CheckpointError('Trailing bytes after the last record')
    return ModelState(config=config, weights=weights, vocab=vocab)


def save_checkpoint(path: str | Path, state: ModelState) -> Path:
    path = Path(path)
    path.parent.mkdir(parents=True, exist_ok=True)
    path.write_bytes(dumps_checkpoint(state))
    logger.info('Saved checkpoint', extra={'path': str(path)})
    return path


def load_checkpoint(path: str | Path) -> ModelState:
    path = Path(path)
    if not path.exists():
        raise CheckpointError(f'Checkpoint not found: {path}', details={'path': str(path)})
    return loads_checkpoint(path.read_bytes())
