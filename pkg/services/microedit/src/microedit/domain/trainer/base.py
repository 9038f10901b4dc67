from __future__ import annotations

from abc import abstractmethod
from collections.abc import Sequence
from typing import Any

from base import BaseService
from microedit.domain.factworld import FactWorld
from microedit.domain.factworld import Probe
from microedit.domain.microlm import ModelState
from microedit.domain.microlm import answer_matches
from microedit.shared.exception import ContractError


def fact_probes(world: FactWorld) -> list[Probe]:
    """The held-in probe set: every fact in its canonical cloze form."""
    return [
        Probe(prompt=world.relation(f.relation).render(f.subject, 0), expected=[f.object])
        for f in world.facts
    ]


class BaseTrainer(BaseService):
    """Common contract of the training entry points: `run` plus `validate_step`."""

    @abstractmethod
    def run(self, *args: Any, **kwargs: Any) -> Any:
        raise NotImplementedError()

    def validate_step(self, model: ModelState, probes: Sequence[Probe], max_answer_tokens: int = 4) -> float:
        """
        Fraction of probes the model answers exactly.

        Raises:
            ContractError: empty probe set
        """
        if not probes:
            raise ContractError('validate_step needs a non-empty probe set')
        hits = sum(answer_matches(model, p.prompt, p.expected, max_answer_tokens) for p in probes)
        return hits / len(probes)
