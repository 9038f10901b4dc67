from __future__ import annotations

from collections.abc import Sequence
from typing import Any
from typing import ClassVar
from typing import Optional

import numpy as np
from base import CustomBaseModel
from logger import get_logger
from microedit.domain.factworld import EditRequest
from microedit.domain.factworld import FactWorld
from microedit.domain.factworld import context_prefix
from microedit.domain.factworld import demonstration
from microedit.domain.microlm import HookMode
from microedit.domain.microlm import HookSpec
from microedit.domain.microlm import ModelState
from microedit.domain.microlm import forward
from microedit.domain.microlm import generate_greedy
from microedit.numerics import cosine
from microedit.shared.exception import ContractError
from microedit.shared.settings import IKEKnobs
from pydantic import Field

from .base import BaseEditor
from .models import EditArea
from .models import EditorCapabilities
from .models import Family
from .responders import Responder

logger = get_logger(__name__)

QUESTION_TEMPLATE = 1


class Demonstration(CustomBaseModel):
    subject: str
    relation: str
    tokens: list[str]
    embedding: np.ndarray


class DemoStore(CustomBaseModel):
    demos: list[Demonstration] = Field(default_factory=list)

    def __len__(self) -> int:
        return len(self.demos)

    def nearest(self, query: np.ndarray, k: int, exclude: tuple[str, str] | None = None) -> list[Demonstration]:
        """k most cosine-similar demonstrations; ties go to the lower index."""
        scored = [
            (-cosine(query, demo.embedding), i)
            for i, demo in enumerate(self.demos)
            if exclude is None or (demo.subject, demo.relation) != exclude
        ]
        return [self.demos[i] for _, i in sorted(scored)[:k]]


def mean_hidden(model: ModelState, tokens: Sequence[str]) -> np.ndarray:
    """Mean last-layer residual output over the positions of `tokens`."""
    site = f'blocks.{model.config.n_layers - 1}'
    result = forward(model, list(tokens), [HookSpec(address=site, mode=HookMode.CAPTURE_OUTPUT)])
    return np.mean(np.stack([result.captures[(site, p)] for p in range(len(tokens))]), axis=0)


def build_demo_store(model: ModelState, world: FactWorld) -> DemoStore:
    demos = []
    for fact in world.facts:
        relation = world.relation(fact.relation)
        tokens = demonstration(relation, fact.subject, fact.object, QUESTION_TEMPLATE)
        demos.append(
            Demonstration(
                subject=fact.subject,
                relation=fact.relation,
                tokens=tokens,
                embedding=mean_hidden(model, relation.render(fact.subject, 0) + [fact.object]),
            ),
        )
    logger.info('Built demonstration store', extra={'demos': len(demos)})
    return DemoStore(demos=demos)


class PrefixResponder(Responder):
    def __init__(self, state: ModelState, prefix: list[str], max_answer_tokens: int = 4):
        self.state = state
        self.prefix = prefix
        self.max_answer_tokens = max_answer_tokens

    def headroom(self, prompt: Sequence[str]) -> int:
        return self.state.config.context_len - len(self.prefix) - len(prompt)

    def generate(self, prompt: Sequence[str], max_new: int, stop_at_end: bool = True) -> list[str]:
        return generate_greedy(self.state, self.prefix + list(prompt), max_new, stop_at_end=stop_at_end)


class IKEEditor(BaseEditor):
    """In-context editing: the new fact and k retrieved demonstrations are prepended to every query."""

    name: ClassVar[str] = 'ike'
    family: ClassVar[Family] = Family.MEMORY_BASED
    capabilities: ClassVar[EditorCapabilities] = EditorCapabilities(
        supports_batch=False, supports_sequential=False, needs_training=True, edit_area=EditArea.IN_CONTEXT,
    )

    prefix: Optional[list[str]] = None

    def is_trained(self) -> bool:
        return self.context.demo_store is not None or self.context.world is not None

    def demo_store(self, model: ModelState) -> DemoStore:
        if self.context.demo_store is None:
            self.context.demo_store = build_demo_store(model, self.context.world)
        return self.context.demo_store

    def execute(self, model: ModelState, requests: list[EditRequest], knobs: IKEKnobs):
        request = requests[0]
        demos: list[Demonstration] = []
        if knobs.k > 0:
            store = self.demo_store(model)
            if not len(store):
                raise ContractError('Demonstration store is empty')
            query = mean_hidden(model, request.edit_prompt)
            demos = store.nearest(query, knobs.k, exclude=(request.subject, request.relation))
        self.prefix = context_prefix([d.tokens for d in demos], request.new_statement)
        return {'prefix': list(self.prefix)}, {
            'demos': len(demos),
            'prefix_tokens': len(self.prefix),
        }

    def aux_state(self) -> Any:
        return None if self.prefix is None else list(self.prefix)

    def restore_aux(self, state: Any) -> None:
        self.prefix = None if state is None else list(state)

    def aux_bytes(self) -> int:
        return len(self.prefix or []) * 8

    def responder(self, model: ModelState) -> Responder:
        return PrefixResponder(model, list(self.prefix or []), self.context.max_answer_tokens)
