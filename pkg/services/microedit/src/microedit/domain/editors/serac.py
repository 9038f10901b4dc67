from __future__ import annotations

from collections.abc import Sequence
from typing import Any
from typing import ClassVar
from typing import Optional

import numpy as np
from base import CustomBaseModel
from logger import get_logger
from microedit.domain.factworld import END
from microedit.domain.factworld import EditRequest
from microedit.domain.microlm import HookMode
from microedit.domain.microlm import HookSpec
from microedit.domain.microlm import ModelState
from microedit.domain.microlm import forward
from microedit.domain.microlm import generate_greedy
from microedit.numerics import cosine
from microedit.shared.exception import LengthError
from microedit.shared.exception import TrainingRequiredError
from microedit.shared.settings import SERACKnobs
from pydantic import Field
from rapidfuzz import fuzz

from .base import BaseEditor
from .models import EditArea
from .models import EditorCapabilities
from .models import Family
from .models import ScopeClassifier
from .responders import Responder

logger = get_logger(__name__)


def prompt_embedding(model: ModelState, prompt: Sequence[str]) -> np.ndarray:
    """Final-layernorm output at the last prompt token."""
    position = len(prompt) - 1
    result = forward(model, list(prompt), [HookSpec(address='ln_f', mode=HookMode.CAPTURE_OUTPUT, token_positions=[position])])
    return result.captures[('ln_f', position)]


def similarity_features(
    query: Sequence[str],
    query_embedding: np.ndarray,
    record: Sequence[str],
    record_embedding: np.ndarray,
) -> np.ndarray:
    """[embedding cosine, token-set overlap in [0, 1]] of a (query, record prompt) pair."""
    overlap = fuzz.token_set_ratio(' '.join(query), ' '.join(record)) / 100.0
    return np.array([cosine(query_embedding, record_embedding), overlap])


def first_relation(prompt: Sequence[str], nouns: dict[str, str]) -> Optional[str]:
    for token in prompt:
        if token in nouns:
            return nouns[token]
    return None


class MemoryRecord(CustomBaseModel):
    request: EditRequest
    embedding: np.ndarray


class EditMemory(CustomBaseModel):
    records: list[MemoryRecord] = Field(default_factory=list)

    def __len__(self) -> int:
        return len(self.records)

    def nearest(self, embedding: np.ndarray) -> Optional[MemoryRecord]:
        """Most cosine-similar record; ties go to the earlier record."""
        best, best_score = None, None
        for record in self.records:
            score = cosine(embedding, record.embedding)
            if best_score is None or score > best_score:
                best, best_score = record, score
        return best

    def nbytes(self) -> int:
        return sum(
            (r.embedding.size + len(r.request.edit_prompt) + len(r.request.target)) * 8
            for r in self.records
        )


class RoutingResponder(Responder):
    """Answers from edit memory when the scope classifier routes the query there, else defers."""

    def __init__(
        self,
        state: ModelState,
        memory: EditMemory,
        classifier: ScopeClassifier,
        nouns: dict[str, str],
        max_answer_tokens: int = 4,
    ):
        self.state = state
        self.memory = memory
        self.classifier = classifier
        self.nouns = nouns
        self.max_answer_tokens = max_answer_tokens

    def route(self, prompt: Sequence[str]) -> Optional[MemoryRecord]:
        if not self.memory.records:
            return None
        embedding = prompt_embedding(self.state, prompt)
        record = self.memory.nearest(embedding)
        features = similarity_features(prompt, embedding, record.request.edit_prompt, record.embedding)
        if self.classifier.score(features) < self.classifier.threshold:
            return None
        if first_relation(prompt, self.nouns) != record.request.relation:
            return None
        return record

    def generate(self, prompt: Sequence[str], max_new: int, stop_at_end: bool = True) -> list[str]:
        prompt = list(prompt)
        if len(prompt) + max_new > self.state.config.context_len:
            raise LengthError(
                f'Prompt of {len(prompt)} tokens leaves no headroom for {max_new} new tokens',
                details={'prompt': len(prompt), 'max_new': max_new, 'context_len': self.state.config.context_len},
            )
        record = self.route(prompt)
        if record is None:
            return generate_greedy(self.state, prompt, max_new, stop_at_end=stop_at_end)
        target = list(record.request.target)
        if stop_at_end:
            return (target + [END])[:max_new]
        routed = target[:max_new]
        remaining = max_new - len(routed)
        if remaining <= 0:
            return routed
        return routed + generate_greedy(self.state, prompt + routed, remaining, stop_at_end=False)


class SERACEditor(BaseEditor):
    """Retrieval plus classifier routing over an edit memory; the base model is never modified."""

    name: ClassVar[str] = 'serac'
    family: ClassVar[Family] = Family.MEMORY_BASED
    capabilities: ClassVar[EditorCapabilities] = EditorCapabilities(
        supports_batch=True, supports_sequential=True, needs_training=True, edit_area=EditArea.EXTERNAL_MODEL,
    )

    memory: EditMemory = Field(default_factory=EditMemory)

    def is_trained(self) -> bool:
        return self.context.scope_classifier is not None

    def execute(self, model: ModelState, requests: list[EditRequest], knobs: SERACKnobs):
        if self.context.scope_classifier is None:
            raise TrainingRequiredError('SERAC needs a trained scope classifier', details={'method': self.name})
        for request in requests:
            self.memory.records.append(
                MemoryRecord(request=request, embedding=prompt_embedding(model, request.edit_prompt)),
            )
        return {'memory_records': len(self.memory)}, {
            'added': len(requests),
            'records': len(self.memory),
            'threshold': round(self.context.scope_classifier.threshold, 6),
        }

    def aux_state(self) -> Any:
        return len(self.memory)

    def restore_aux(self, state: Any) -> None:
        del self.memory.records[state or 0:]

    def aux_bytes(self) -> int:
        classifier = self.context.scope_classifier
        return self.memory.nbytes() + (classifier.nbytes() if classifier is not None else 0)

    def responder(self, model: ModelState) -> Responder:
        if self.context.scope_classifier is None:
            raise TrainingRequiredError('SERAC needs a trained scope classifier', details={'method': self.name})
        return RoutingResponder(
            model, self.memory, self.context.scope_classifier, self.context.relation_nouns(), self.context.max_answer_tokens,
        )
