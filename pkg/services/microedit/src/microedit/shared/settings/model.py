from __future__ import annotations

from base import BaseModel


class ModelSettings(BaseModel):
    n_layers: int = 6
    d_model: int = 128
    n_heads: int = 4
    d_mlp: int = 512
    context_len: int = 64
    init_std: float = 0.02
    layernorm_eps: float = 1e-10
