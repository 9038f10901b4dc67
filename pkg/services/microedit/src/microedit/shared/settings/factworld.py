from __future__ import annotations

from base import BaseModel


class FactWorldSettings(BaseModel):
    n_entities: int = 100
    n_relations: int = 6
    n_facts: int = 200
    n_edits: int = 50
    context_ratio: float = 0.3
    max_demos: int = 2
    n_locality: int = 4
    min_syllables: int = 2
    max_syllables: int = 3
