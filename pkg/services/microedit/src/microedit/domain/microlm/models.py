from __future__ import annotations

from enum import Enum
from typing import Any
from typing import Optional

import numpy as np
from base import CustomBaseModel
from base import FrozenModel
from microedit.shared.settings import ModelSettings
from pydantic import Field


class ModelConfig(FrozenModel):
    n_layers: int
    d_model: int
    n_heads: int
    d_mlp: int
    vocab_size: int
    context_len: int
    layernorm_eps: float = 1e-10

    @classmethod
    def from_settings(cls, settings: ModelSettings, vocab_size: int) -> ModelConfig:
        return cls(
            n_layers=settings.n_layers,
            d_model=settings.d_model,
            n_heads=settings.n_heads,
            d_mlp=settings.d_mlp,
            vocab_size=vocab_size,
            context_len=settings.context_len,
            layernorm_eps=settings.layernorm_eps,
        )

    @property
    def d_head(self) -> int:
        return self.d_model // self.n_heads


class HookMode(str, Enum):
    CAPTURE_INPUT = 'capture-input'
    CAPTURE_OUTPUT = 'capture-output'
    REPLACE_OUTPUT = 'replace-output'
    ADD_TO_OUTPUT = 'add-to-output'


class HookSpec(CustomBaseModel):
    address: str
    mode: HookMode
    token_positions: Optional[list[int]] = Field(
        default=None,
        description='Positions along the sequence axis; None selects all, negatives count from the end',
    )
    payload: Any = Field(default=None, description='ndarray or graph Node for replace/add modes')


class ForwardResult(CustomBaseModel):
    logits: np.ndarray = Field(..., description='[T, V] for one sequence, [B, T, V] for a batch')
    logits_node: Any = Field(default=None, description='Graph node of the logits')
    captures: dict[tuple[str, int], np.ndarray] = Field(default_factory=dict)
    input_captures: dict[tuple[str, int], np.ndarray] = Field(default_factory=dict)


class Checkpoint(CustomBaseModel):
    config: ModelConfig
    weights: dict[str, np.ndarray]


class TraceResult(CustomBaseModel):
    grid: np.ndarray = Field(..., description='[n_layers, T] indirect effects')
    clean_prob: float
    corrupted_prob: float
    subject_last: int
    tokens: list[str]
    restore: str = 'mlp'

