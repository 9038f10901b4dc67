from __future__ import annotations

from collections.abc import Sequence

import numpy as np
from base import FrozenModel
from microedit.domain.factworld import END
from microedit.domain.factworld import FactWorld
from microedit.domain.factworld import SPECIALS
from microedit.shared.exception import TokenError
from pydantic import PrivateAttr


class Vocabulary(FrozenModel):
    """Closed word-level vocabulary; specials first, then sorted words."""

    tokens: list[str]
    _ids: dict[str, int] = PrivateAttr(default_factory=dict)

    def model_post_init(self, __context) -> None:
        self._ids = {token: i for i, token in enumerate(self.tokens)}

    @classmethod
    def from_world(cls, world: FactWorld) -> Vocabulary:
        words: set[str] = set(world.entities)
        for relation in world.relations:
            for template in relation.templates:
                words.update(w for w in template.split() if w != '{s}')
        return cls(tokens=list(SPECIALS) + sorted(words - set(SPECIALS)))

    def __len__(self) -> int:
        return len(self.tokens)

    def __contains__(self, token: str) -> bool:
        return token in self._ids

    @property
    def end_id(self) -> int:
        return self._ids[END]

    def id(self, token: str) -> int:
        try:
            return self._ids[token]
        except KeyError:
            raise TokenError(f'Unknown token {token!r}', details={'token': token}) from None

    def encode(self, tokens: Sequence[str]) -> np.ndarray:
        return np.array([self.id(t) for t in tokens], dtype=np.int64)

    def decode(self, ids: Sequence[int]) -> list[str]:
        return [self.tokens[int(i)] for i in ids]
