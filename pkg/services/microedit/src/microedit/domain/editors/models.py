from __future__ import annotations

from enum import Enum
from typing import Any
from typing import Optional

import numpy as np
from base import CustomBaseModel
from base import FrozenModel
from microedit.domain.microlm import Checkpoint
from microedit.domain.microlm import ModelState
from pydantic import Field


class EditArea(str, Enum):
    EXTERNAL_MODEL = 'external-model'
    IN_CONTEXT = 'in-context'
    MLP_CODEBOOK = 'mlp-codebook'
    LORA_CODEBOOK = 'lora-codebook'
    MLP = 'mlp'
    MLP_RANGE = 'mlp-range'


class Family(str, Enum):
    MEMORY_BASED = 'memory-based'
    META_LEARNING = 'meta-learning'
    LOCATE_THEN_EDIT = 'locate-then-edit'


class EditorCapabilities(FrozenModel):
    supports_batch: bool
    supports_sequential: bool
    needs_training: bool
    edit_area: EditArea


class WeightDelta(CustomBaseModel):
    weights: dict[str, np.ndarray] = Field(default_factory=dict, description='Per-address tensors to add')
    auxiliary: dict[str, Any] = Field(default_factory=dict, description='Codebook, memory or prefix payload')

    @property
    def is_pure_weight(self) -> bool:
        return not self.auxiliary

    def apply(self, model: ModelState, sign: float = 1.0) -> None:
        for address, delta in self.weights.items():
            model.weights[address] = model.weights[address] + sign * delta

    def max_abs(self) -> float:
        return max((float(np.max(np.abs(d))) for d in self.weights.values() if d.size), default=0.0)


class EditOutcome(CustomBaseModel):
    method: str
    delta: WeightDelta
    elapsed_seconds: float = Field(..., ge=0.0)
    extra_state_bytes: int = Field(..., ge=0)
    method_log: dict[str, Any] = Field(default_factory=dict)
    case_ids: list[int] = Field(default_factory=list)
    snapshot: Optional[Checkpoint] = None
    aux_snapshot: Any = None


class CodebookEntry(CustomBaseModel):
    key: np.ndarray
    value: np.ndarray
    radius: float
    label: str


class Codebook(CustomBaseModel):
    address: str
    entries: list[CodebookEntry] = Field(default_factory=list)

    def nbytes(self) -> int:
        return sum((e.key.size + e.value.size + 2) * 8 for e in self.entries)


class ScopeClassifier(CustomBaseModel):
    weights: np.ndarray = Field(..., description='One weight per similarity feature')
    bias: float
    threshold: float
    heldout_accuracy: Optional[float] = None

    def score(self, features: np.ndarray) -> float:
        z = float(np.dot(self.weights, features) + self.bias)
        return float(1.0 / (1.0 + np.exp(-z))) if z >= 0 else float(np.exp(z) / (1.0 + np.exp(z)))

    def nbytes(self) -> int:
        return (self.weights.size + 2) * 8
