from __future__ import annotations

from typing import Any
from typing import Optional

import numpy as np
from base import CustomBaseModel
from microedit.domain.factworld import FactWorld
from microedit.domain.factworld import END
from microedit.domain.microlm import ModelState
from microedit.domain.microlm import forward
from microedit.numerics import ops
from pydantic import Field

from .models import ScopeClassifier


class PreparedRequest(CustomBaseModel):
    """Teacher-forced view of (prompt, target): input tokens and the positions predicting the target."""

    tokens: list[str]
    target_positions: list[int]
    target_ids: np.ndarray
    prompt_len: int


def prepare_request(state: ModelState, prompt: list[str], target: list[str]) -> PreparedRequest:
    full = list(prompt) + list(target) + [END]
    ids = state.vocab.encode(full)
    prompt_len = len(prompt)
    return PreparedRequest(
        tokens=full[:-1],
        target_positions=list(range(prompt_len - 1, len(full) - 1)),
        target_ids=ids[prompt_len:],
        prompt_len=prompt_len,
    )


def request_nll(state: ModelState, prepared: PreparedRequest, hooks=None, *, graph=None, params=None, exit_layer=None):
    """Mean NLL of the target tokens (and the end token) as a graph node."""
    result = forward(state, prepared.tokens, hooks, graph=graph, params=params, exit_layer=exit_layer)
    logits = ops.select(result.logits_node, (0, prepared.target_positions))
    return ops.cross_entropy(logits, prepared.target_ids)


class EditContext(CustomBaseModel):
    """Resources shared by the editors of one run."""

    seed: int = 0
    world: Optional[FactWorld] = None
    corpus: list[list[str]] = Field(default_factory=list)
    max_answer_tokens: int = 4
    trace_noise_scale: float = 3.0
    trace_samples: int = 10
    second_moments: dict[tuple[str, int], np.ndarray] = Field(default_factory=dict)
    demo_store: Any = None
    scope_classifier: Optional[ScopeClassifier] = None

    def relation_nouns(self) -> dict[str, str]:
        if self.world is None:
            return {}
        return {spec.noun: spec.id for spec in self.world.relations}
